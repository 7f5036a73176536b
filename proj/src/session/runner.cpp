// Copyright 2026 The Branchtune Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "branchtune/session/runner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>

#include "branchtune/controller.hpp"
#include "branchtune/event_log.hpp"
#include "branchtune/transport.hpp"
#include "format_util.hpp"
#include "json.hpp"

namespace branchtune::session {

namespace {

std::uint64_t round_seed(std::uint64_t seed, std::uint64_t round) { return seed * 1000003ULL + round; }

std::unique_ptr<Transport> make_transport(const SessionConfig& cfg, TrainerEndpoint& endpoint) {
  if (cfg.transport == TransportKind::kInProcess) return std::make_unique<InProcessTransport>(endpoint);
  return std::make_unique<RecordTransport>(endpoint, cfg.space.names());
}

// Everything one session needs, wired in dependency order.
struct Harness {
  explicit Harness(const SessionConfig& cfg)
      : config(cfg),
        task(sim::make_task(cfg.task)),
        trainer(task, trainer_config(cfg)),
        transport(make_transport(cfg, trainer)),
        link(*transport, trainer, &log),
        controller(link, controller_config()) {}

  ControllerConfig controller_config() {
    ControllerConfig out;
    out.trial_time_floor = config.tuner.trial_time_floor;
    out.trial_time_cap_epochs = config.tuner.trial_time_cap_epochs;
    out.measure_decision_time = !config.deterministic;
    out.clocks_per_epoch = [this](BranchId b) { return trainer.clocks_per_epoch(b); };
    return out;
  }

  PlateauPolicy plateau_policy(int max_epochs) const {
    PlateauPolicy p;
    p.window = config.tuner.plateau_window;
    p.higher_is_better = task->metric_higher_is_better();
    p.min_relative_improvement = config.tuner.plateau_tolerance;
    if (!p.higher_is_better && config.tuner.stop_at_threshold) p.loss_threshold = config.task.loss_threshold;
    p.max_epochs = max_epochs;
    return p;
  }

  Searcher searcher(SearchAlgorithm algorithm, std::uint64_t round) const {
    return Searcher(config.space, algorithm, round_seed(config.seed, round), config.grid_points);
  }

  bool reaches_threshold(double metric) const {
    return !task->metric_higher_is_better() && config.task.loss_threshold && std::isfinite(metric) &&
           metric <= *config.task.loss_threshold;
  }

  // Worst value for ranking; non-finite metrics always lose.
  double rank_value(double metric) const {
    if (!std::isfinite(metric)) return -std::numeric_limits<double>::infinity();
    return task->metric_higher_is_better() ? metric : -metric;
  }

  const SessionConfig& config;
  EventLog log;
  std::shared_ptr<const sim::Task> task;
  sim::SimTrainer trainer;
  std::unique_ptr<Transport> transport;
  BranchLink link;
  TuningController controller;
};

void record_epochs(SessionResult& r, const PlateauResult& pr, BranchId branch, std::int64_t lineage,
                   std::int64_t first_epoch) {
  for (std::size_t i = 0; i < pr.metrics.size(); ++i)
    r.epochs.push_back({lineage, branch.value, first_epoch + static_cast<std::int64_t>(i) + 1, pr.clocks[i],
                        pr.times[i], pr.metrics[i]});
}

void finish(SessionResult& r, Harness& h, BranchId survivor) {
  std::int64_t testing = 0;
  for (const auto& [id, rec] : h.link.records())
    if (rec.type == BranchType::kTesting) testing += rec.clocks;
  const std::int64_t training = h.link.total_clocks() - testing;
  r.total_clocks = h.link.total_clocks();
  r.wall_seconds = h.trainer.now();
  r.overhead_fraction =
      training > 0 ? static_cast<double>(h.link.clocks_outside_lineage(survivor)) / static_cast<double>(training) : 0.0;
  r.final_branch = survivor.value;
  r.peak_live = h.link.peak_live();
  r.warnings = h.trainer.warnings();
  h.log.event("session_end", {{"mode", r.mode},
                              {"final_metric", r.final_metric},
                              {"total_clocks", r.total_clocks},
                              {"wall_seconds", r.wall_seconds},
                              {"overhead_fraction", r.overhead_fraction},
                              {"retunes", std::int64_t{r.retunes}},
                              {"stop_reason", r.stop_reason}});
  r.log_text = h.log.text();
}

void run_mltuner(const SessionConfig& cfg, Harness& h, SessionResult& r) {
  BranchId current = kRootBranch;
  int max_trials = cfg.tuner.first_retune_max_trials;
  std::uint64_t round = 0;

  if (cfg.tuner.mode == TunerMode::kMltuner && cfg.tuner.initial_tuning) {
    Searcher searcher = h.searcher(cfg.algorithm, ++round);
    const std::int64_t start = h.link.total_clocks();
    TuningOutcome outcome = h.controller.initial_tuning(kRootBranch, searcher);
    r.tuning_clocks += h.link.total_clocks() - start;
    h.link.free(kRootBranch);
    current = outcome.best_branch;
    max_trials = outcome.trials_used;
    r.trials_per_round.push_back(outcome.trials_used);
    r.final_setting = outcome.best_setting;
  } else {
    current = h.link.fork(kRootBranch, cfg.tuner.fixed_setting);
    h.link.free(kRootBranch);
    r.final_setting = cfg.tuner.fixed_setting;
  }

  const bool may_retune = cfg.tuner.mode == TunerMode::kMltuner && cfg.tuner.retune;
  std::int64_t epochs = 0;
  while (true) {
    const auto left = static_cast<int>(cfg.tuner.max_epochs - epochs);
    if (left <= 0) {
      r.stop_reason = "horizon";
      break;
    }
    PlateauResult pr = h.controller.run_until_plateau(current, h.plateau_policy(left));
    record_epochs(r, pr, current, 0, epochs);
    epochs += pr.epochs;
    if (!pr.metrics.empty()) r.final_metric = pr.metrics.back();
    if (pr.reason != PlateauReason::kPlateau) {
      r.stop_reason = std::string(to_string(pr.reason));
      break;
    }
    if (!may_retune || r.retunes >= cfg.tuner.max_retunes) {
      r.stop_reason = "plateau";
      break;
    }

    Searcher searcher = h.searcher(cfg.algorithm, ++round);
    RetunePolicy policy;
    policy.max_trial_time_per_setting = h.controller.epoch_seconds(current);
    policy.max_trials = max_trials;
    policy.plateau_window = cfg.tuner.plateau_window;
    const std::int64_t start = h.link.total_clocks();
    std::optional<TuningOutcome> outcome = h.controller.retune(current, policy, searcher);
    r.tuning_clocks += h.link.total_clocks() - start;
    ++r.retunes;
    if (!outcome) {
      r.trials_per_round.push_back(static_cast<int>(searcher.proposals()));
      r.stop_reason = "converged";
      break;
    }
    r.trials_per_round.push_back(outcome->trials_used);
    max_trials = outcome->trials_used;
    h.link.free(current);
    current = outcome->best_branch;
    r.final_setting = outcome->best_setting;
  }
  r.reached_threshold = h.reaches_threshold(r.final_metric);
  finish(r, h, current);
}

void run_fullrun(const SessionConfig& cfg, Harness& h, SessionResult& r) {
  const SearchAlgorithm algo = cfg.algorithm == SearchAlgorithm::kGrid ? SearchAlgorithm::kGrid : SearchAlgorithm::kRandom;
  Searcher searcher = h.searcher(algo, 1);
  std::optional<BranchId> best;
  double best_metric = std::numeric_limits<double>::quiet_NaN();

  PlateauPolicy policy = h.plateau_policy(cfg.tuner.max_epochs);
  policy.stop_on_divergence = true;
  for (int i = 0; i < cfg.tuner.fullrun_settings; ++i) {
    auto setting = searcher.propose();
    if (!setting) break;
    BranchId branch = h.link.fork(kRootBranch, *setting);
    PlateauResult pr = h.controller.run_until_plateau(branch, policy);
    record_epochs(r, pr, branch, i, 0);
    const double metric =
        pr.reason == PlateauReason::kDiverged || pr.metrics.empty() ? std::numeric_limits<double>::quiet_NaN()
                                                                    : pr.metrics.back();
    h.log.event("fullrun_setting", {{"index", std::int64_t{i}},
                                    {"branch", branch.value},
                                    {"setting", format_setting(*setting)},
                                    {"metric", metric},
                                    {"reason", std::string(to_string(pr.reason))},
                                    {"clocks", h.link.record(branch).clocks}});
    if (!best || h.rank_value(metric) > h.rank_value(best_metric)) {
      if (best) h.link.free(*best);
      best = branch;
      best_metric = metric;
      r.final_setting = *setting;
    } else {
      h.link.free(branch);
    }
  }
  r.final_metric = best_metric;
  r.reached_threshold = h.reaches_threshold(best_metric);
  r.stop_reason = "budget";
  finish(r, h, best.value_or(kRootBranch));
}

void run_halving(const SessionConfig& cfg, Harness& h, SessionResult& r) {
  const HalvingOptions& opt = cfg.tuner.halving;
  const int n = opt.settings;
  std::int64_t budget = opt.initial_budget > 0 ? opt.initial_budget : n * h.trainer.clocks_per_epoch(kRootBranch);
  std::int64_t cap = opt.clock_cap;
  if (cap <= 0)
    cap = halving_bracket_clocks(budget, n) + halving_bracket_clocks(2 * budget, n) +
          halving_bracket_clocks(4 * budget, n);

  std::optional<BranchId> best;
  double best_metric = std::numeric_limits<double>::quiet_NaN();
  std::int64_t bracket = 0;
  while (h.link.total_clocks() + halving_bracket_clocks(budget, n) <= cap) {
    ++bracket;
    h.log.event("bracket_begin", {{"bracket", bracket}, {"budget", budget}, {"settings", std::int64_t{n}}});
    Searcher searcher = h.searcher(SearchAlgorithm::kRandom, static_cast<std::uint64_t>(bracket));
    struct Entry {
      BranchId branch;
      TunableSetting setting;
      double metric = 0.0;
      double rank = 0.0;
    };
    std::vector<Entry> alive;
    for (int i = 0; i < n; ++i) {
      auto setting = searcher.propose();
      if (!setting) break;
      alive.push_back({h.link.fork(kRootBranch, *setting), *setting});
    }
    const std::int64_t step = budget / n;
    for (int j = 0;; ++j) {
      const std::int64_t target = step << j;
      for (Entry& e : alive) {
        h.link.run_clocks(e.branch, target - h.link.record(e.branch).clocks);
        BranchId probe = h.link.fork(e.branch, {}, BranchType::kTesting);
        e.metric = h.link.step(probe);
        h.link.free(probe);
        const auto& trace = h.link.record(e.branch).trace;
        e.rank = opt.use_training_loss
                     ? (trace.empty() || !std::isfinite(trace.back().x) ? -std::numeric_limits<double>::infinity()
                                                                        : -trace.back().x)
                     : h.rank_value(e.metric);
        r.epochs.push_back({bracket, e.branch.value, j + 1, h.link.total_clocks(), h.trainer.now(), e.metric});
      }
      if (alive.size() <= 1) break;
      std::stable_sort(alive.begin(), alive.end(), [](const Entry& a, const Entry& b) { return a.rank > b.rank; });
      for (std::size_t k = alive.size() / 2; k < alive.size(); ++k) h.link.free(alive[k].branch);
      alive.resize(alive.size() / 2);
    }
    if (!alive.empty()) {
      Entry& winner = alive.front();
      h.log.event("bracket_end", {{"bracket", bracket},
                                  {"winner", winner.branch.value},
                                  {"setting", format_setting(winner.setting)},
                                  {"metric", winner.metric}});
      if (!best || h.rank_value(winner.metric) > h.rank_value(best_metric)) {
        if (best) h.link.free(*best);
        best = winner.branch;
        best_metric = winner.metric;
        r.final_setting = winner.setting;
      } else {
        h.link.free(winner.branch);
      }
    }
    budget *= 2;
  }
  r.final_metric = best_metric;
  r.reached_threshold = h.reaches_threshold(best_metric);
  r.stop_reason = "clock_cap";
  finish(r, h, best.value_or(kRootBranch));
}

}  // namespace

std::int64_t halving_bracket_clocks(std::int64_t budget, int settings) {
  int rounds = 0;
  while ((1 << rounds) < settings) ++rounds;
  // Round 0 costs B, each later round B/2; one test per survivor per round.
  return budget + rounds * (budget / 2) + (2 * static_cast<std::int64_t>(settings) - 1);
}

SessionResult run_session(const SessionConfig& cfg) {
  cfg.validate();
  Harness h(cfg);
  SessionResult r;
  r.mode = std::string(to_string(cfg.tuner.mode));
  r.seed = cfg.seed;
  h.log.event("session_begin", {{"mode", r.mode},
                                {"seed", static_cast<std::int64_t>(cfg.seed)},
                                {"task", std::string(sim::to_string(cfg.task.kind))},
                                {"searcher", std::string(to_string(cfg.algorithm))},
                                {"deterministic", cfg.deterministic}});
  switch (cfg.tuner.mode) {
    case TunerMode::kMltuner:
    case TunerMode::kFixed: run_mltuner(cfg, h, r); break;
    case TunerMode::kFullrun: run_fullrun(cfg, h, r); break;
    case TunerMode::kHalving: run_halving(cfg, h, r); break;
  }
  if (!cfg.output_dir.empty()) write_outputs(r, cfg.output_dir);
  return r;
}

std::string result_json(const SessionResult& r) {
  nlohmann::ordered_json j;
  auto number = [](double v) -> nlohmann::ordered_json {
    if (std::isfinite(v)) return v;
    return detail::format_double(v);
  };
  j["mode"] = r.mode;
  j["seed"] = r.seed;
  j["final_metric"] = number(r.final_metric);
  j["total_clocks"] = r.total_clocks;
  j["wall_seconds"] = number(r.wall_seconds);
  j["overhead_fraction"] = number(r.overhead_fraction);
  j["retunes"] = r.retunes;
  j["tuning_clocks"] = r.tuning_clocks;
  j["reached_threshold"] = r.reached_threshold;
  j["stop_reason"] = r.stop_reason;
  j["final_setting"] = nlohmann::ordered_json::object();
  for (const auto& [name, value] : r.final_setting) j["final_setting"][name] = number(value);
  j["trials_per_round"] = r.trials_per_round;
  j["final_branch"] = r.final_branch;
  j["peak_live"] = r.peak_live;
  j["message_log"] = "messages.jsonl";
  j["warnings"] = r.warnings;
  return j.dump(2) + "\n";
}

void write_outputs(const SessionResult& r, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create '" + dir + "': " + ec.message());
  const std::filesystem::path base(dir);
  auto open = [&](const char* name) {
    std::ofstream out(base / name, std::ios::binary);
    if (!out) throw Error(ErrorCode::kIo, "cannot write '" + (base / name).string() + "'");
    return out;
  };
  {
    auto out = open("messages.jsonl");
    out << r.log_text;
  }
  {
    auto out = open("epochs.csv");
    out << "lineage,branch,epoch,clock,time,metric\n";
    for (const auto& e : r.epochs)
      out << e.lineage << ',' << e.branch << ',' << e.epoch << ',' << e.clock << ','
          << detail::format_double(e.time) << ',' << detail::format_double(e.metric) << '\n';
  }
  {
    auto out = open("result.json");
    out << result_json(r);
  }
}

}  // namespace branchtune::session
