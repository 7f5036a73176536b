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

#include "branchtune/controller.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <utility>

namespace branchtune {

namespace {

constexpr double kSlack = 1e-9;

double observed_speed(const Summary& s) { return s.label == Label::kConverging ? s.speed : 0.0; }

}  // namespace

std::string_view to_string(PlateauReason reason) {
  switch (reason) {
    case PlateauReason::kPlateau: return "plateau";
    case PlateauReason::kThreshold: return "threshold";
    case PlateauReason::kHorizon: return "horizon";
    case PlateauReason::kDiverged: return "diverged";
  }
  return "?";
}

BranchLink::BranchLink(Transport& transport, const TimeSource& time, EventLog* log)
    : transport_(transport), time_(time), log_(log) {
  BranchRecord root;
  root.id = kRootBranch;
  root.parent = kRootBranch;
  records_.emplace(kRootBranch.value, std::move(root));
  live_.insert(kRootBranch.value);
}

void BranchLink::send(const protocol::Message& msg) {
  if (log_) log_->message(msg, true);
  transport_.send(msg);
}

BranchRecord& BranchLink::mutable_record(BranchId branch) {
  auto it = records_.find(branch.value);
  if (it == records_.end()) throw Error(ErrorCode::kUnknownBranch, "no record of branch " + std::to_string(branch.value));
  return it->second;
}

const BranchRecord& BranchLink::record(BranchId branch) const {
  auto it = records_.find(branch.value);
  if (it == records_.end()) throw Error(ErrorCode::kUnknownBranch, "no record of branch " + std::to_string(branch.value));
  return it->second;
}

std::optional<double> BranchLink::measured_per_clock(BranchId branch) const {
  const BranchRecord& rec = record(branch);
  if (rec.per_clock) return rec.per_clock;
  if (rec.clocks > 0) return rec.run_time / static_cast<double>(rec.clocks);
  return std::nullopt;
}

bool BranchLink::live(BranchId branch) const { return live_.count(branch.value) != 0; }

BranchId BranchLink::fork(BranchId parent, const TunableSetting& setting, BranchType type) {
  if (!live(parent)) throw Error(ErrorCode::kUnknownParent, "fork from dead branch " + std::to_string(parent.value));
  BranchId id{next_id_++};
  send(protocol::ForkBranch{clock_, id, parent, setting, type});
  BranchRecord rec;
  rec.id = id;
  rec.parent = parent;
  rec.setting = setting;
  rec.type = type;
  records_.emplace(id.value, std::move(rec));
  live_.insert(id.value);
  peak_live_ = std::max(peak_live_, live_.size());
  return id;
}

void BranchLink::free(BranchId branch) {
  if (!live(branch)) throw Error(ErrorCode::kUnknownBranch, "free of dead branch " + std::to_string(branch.value));
  send(protocol::FreeBranch{clock_, branch});
  live_.erase(branch.value);
  mutable_record(branch).live = false;
}

double BranchLink::step(BranchId branch) {
  if (!live(branch)) throw Error(ErrorCode::kUnknownBranch, "schedule of dead branch " + std::to_string(branch.value));
  // Workers drop their cached parameters when the scheduled branch changes.
  // Nothing in the simulator depends on that cache, so it is only logged.
  if (log_ && last_scheduled_ && *last_scheduled_ != branch.value)
    log_->event("cache_clear", {{"clock", clock_.value}, {"from", *last_scheduled_}, {"to", branch.value}});
  last_scheduled_ = branch.value;
  const double before = time_.now();
  send(protocol::ScheduleBranch{clock_, branch});
  protocol::Message reply = transport_.receive();
  if (log_) log_->message(reply, false);
  const auto* report = std::get_if<protocol::ReportProgress>(&reply);
  if (!report) throw Error(ErrorCode::kMalformedRecord, "expected a progress report");
  if (report->clock != clock_)
    throw Error(ErrorCode::kMalformedRecord, "progress for clock " + std::to_string(report->clock.value) +
                                                 ", expected " + std::to_string(clock_.value));
  ++clock_.value;
  BranchRecord& rec = mutable_record(branch);
  rec.run_time += time_.now() - before;
  ++rec.clocks;
  rec.trace.push_back({rec.run_time, report->progress});
  return report->progress;
}

void BranchLink::run_clocks(BranchId branch, std::int64_t clocks) {
  for (std::int64_t i = 0; i < clocks; ++i) step(branch);
}

double BranchLink::per_clock_seconds(BranchId branch, std::optional<double> max_run_time) {
  BranchRecord& rec = mutable_record(branch);
  if (rec.per_clock) return *rec.per_clock;
  const double start = rec.run_time;
  int done = 0;
  while (done < kProbeClocks) {
    step(branch);
    ++done;
    const double per = (rec.run_time - start) / done;
    // Stop probing early rather than overrun a run-time bound.
    if (max_run_time && rec.run_time + per > *max_run_time + kSlack) break;
  }
  rec.per_clock = (rec.run_time - start) / done;
  return *rec.per_clock;
}

void BranchLink::run_for_seconds(BranchId branch, double seconds, std::optional<double> max_run_time) {
  const BranchRecord& rec = record(branch);
  const double target = rec.run_time + seconds;
  const double per = per_clock_seconds(branch, max_run_time);
  const double remaining = target - rec.run_time;
  if (remaining <= kSlack || per <= 0.0) return;
  auto clocks = static_cast<std::int64_t>(std::ceil(remaining / per - kSlack));
  clocks = std::max<std::int64_t>(clocks, 1);
  if (max_run_time) {
    const auto room = static_cast<std::int64_t>(std::floor((*max_run_time - rec.run_time) / per + kSlack));
    clocks = std::min(clocks, std::max<std::int64_t>(room, 0));
  }
  run_clocks(branch, clocks);
}

std::int64_t BranchLink::clocks_outside_lineage(BranchId survivor) const {
  std::set<std::int64_t> lineage;
  for (std::int64_t id = survivor.value;;) {
    lineage.insert(id);
    const BranchRecord& rec = record(BranchId{id});
    if (rec.parent.value == id) break;
    id = rec.parent.value;
  }
  std::int64_t total = 0;
  for (const auto& [id, rec] : records_)
    if (rec.type == BranchType::kTraining && !lineage.count(id)) total += rec.clocks;
  return total;
}

TuningController::TuningController(BranchLink& link, ControllerConfig config)
    : link_(link), config_(std::move(config)) {}

void TuningController::note(std::string_view event, std::vector<Field> fields) {
  if (link_.log()) link_.log()->event(event, std::move(fields));
}

void TuningController::note_trial(BranchId branch, std::optional<double> bound) {
  const BranchRecord& rec = link_.record(branch);
  std::vector<Field> fields = {{"round", std::int64_t{round_}},
                               {"branch", rec.id.value},
                               {"setting", format_setting(rec.setting)},
                               {"run_time", rec.run_time},
                               {"clocks", rec.clocks}};
  if (bound) fields.emplace_back("max_trial_time", *bound);
  note("trial_end", std::move(fields));
}

double TuningController::propose_timed(Searcher& searcher, std::optional<TunableSetting>& out) {
  const auto start = std::chrono::steady_clock::now();
  out = searcher.propose();
  if (!config_.measure_decision_time) return config_.modeled_decision_seconds;
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Summary TuningController::summarize_branch(BranchId branch) {
  const BranchRecord& rec = link_.record(branch);
  Summary s = summarize(rec.trace, config_.summarizer);
  note("summary", {{"branch", branch.value},
                   {"speed", s.speed},
                   {"noise", s.noise},
                   {"range_x", s.range_x},
                   {"range_t", s.range_t},
                   {"label", std::string(to_string(s.label))}});
  return s;
}

double TuningController::epoch_seconds(BranchId branch, std::optional<double> per_clock) const {
  if (!config_.clocks_per_epoch) return std::numeric_limits<double>::infinity();
  std::optional<double> per = link_.measured_per_clock(branch);
  if (!per) per = per_clock;
  if (!per) return std::numeric_limits<double>::infinity();
  return static_cast<double>(config_.clocks_per_epoch(branch)) * *per;
}

TrialTimeDecision TuningController::decide_trial_time(BranchId parent, Searcher& searcher,
                                                      const TrialBounds& bounds) {
  TrialTimeDecision out;
  std::vector<BranchId> trials;
  double decision_time = 0.0;
  std::optional<double> trial_time;
  std::optional<double> cap;

  auto fix_schedule = [&](double per_clock) {
    double floor = config_.trial_time_floor.value_or(config_.floor_probe_clocks * per_clock);
    floor = std::max(floor, decision_time);
    if (bounds.max_trial_time) cap = *bounds.max_trial_time;
    else if (config_.trial_time_cap) cap = *config_.trial_time_cap;
    else cap = config_.trial_time_cap_epochs * epoch_seconds(parent, per_clock);
    trial_time = std::min(floor, *cap);
    out.schedule.push_back(*trial_time);
    note("trial_time", {{"round", std::int64_t{round_}}, {"seconds", *trial_time}});
  };
  if (config_.trial_time_floor) fix_schedule(0.0);
  else if (auto per = link_.measured_per_clock(parent)) fix_schedule(*per);

  auto release_all = [&] {
    for (BranchId id : trials) link_.free(id);
    trials.clear();
  };

  while (true) {
    const bool room = (bounds.max_trials == 0 || out.trials_used < bounds.max_trials) &&
                      out.trials_used < config_.max_trials_per_round;
    if (room && !searcher.exhausted()) {
      std::optional<TunableSetting> setting;
      const double spent = propose_timed(searcher, setting);
      decision_time = std::max(decision_time, spent);
      if (setting) {
        BranchId id = link_.fork(parent, *setting);
        trials.push_back(id);
        ++out.trials_used;
        if (!trial_time) fix_schedule(link_.per_clock_seconds(id, bounds.max_trial_time));
        else if (decision_time > *trial_time && !config_.trial_time_floor) {
          // A slower searcher decision lifts the current trial time.
          trial_time = std::min(decision_time, *cap);
        }
      }
    }
    if (!trial_time) {
      // Nothing to measure against: the searcher has no proposals at all.
      throw Error(ErrorCode::kTrialTimeCeilingExceeded, "no setting available to decide a trial time");
    }

    std::vector<std::pair<BranchId, Summary>> summaries;
    for (BranchId id : trials) {
      link_.run_for_seconds(id, *trial_time - link_.record(id).run_time, cap);
      summaries.emplace_back(id, summarize_branch(id));
    }

    std::vector<BranchId> kept;
    for (auto& [id, summary] : summaries) {
      if (summary.label == Label::kDiverged) {
        note_trial(id, cap);
        searcher.observe({link_.record(id).setting, 0.0});
        link_.free(id);
      } else {
        kept.push_back(id);
      }
    }
    trials = kept;
    summaries.erase(std::remove_if(summaries.begin(), summaries.end(),
                                   [](const auto& p) { return p.second.label == Label::kDiverged; }),
                    summaries.end());

    const std::pair<BranchId, Summary>* best = nullptr;
    for (const auto& entry : summaries)
      if (entry.second.label == Label::kConverging && (!best || entry.second.speed > best->second.speed))
        best = &entry;

    if (best) {
      for (const auto& [id, summary] : summaries) {
        note_trial(id, cap);
        searcher.observe({link_.record(id).setting, observed_speed(summary)});
      }
      out.trial_time = *trial_time;
      out.best = {best->first, link_.record(best->first).setting, link_.record(best->first).run_time,
                  best->second};
      for (BranchId id : trials)
        if (id != best->first) link_.free(id);
      note("trial_time_decided", {{"round", std::int64_t{round_}},
                                  {"seconds", out.trial_time},
                                  {"best_branch", out.best.id.value},
                                  {"trials", std::int64_t{out.trials_used}}});
      return out;
    }

    if (*trial_time >= *cap * (1.0 - kSlack)) {
      for (const auto& [id, summary] : summaries) {
        note_trial(id, cap);
        searcher.observe({link_.record(id).setting, 0.0});
      }
      release_all();
      const bool more = bounds.exhaust_at_cap && bounds.max_trials > 0 && out.trials_used < bounds.max_trials &&
                        out.trials_used < config_.max_trials_per_round && !searcher.exhausted();
      if (more) continue;
      note("trial_time_ceiling", {{"round", std::int64_t{round_}}, {"seconds", *trial_time}, {"cap", *cap}});
      throw Error(ErrorCode::kTrialTimeCeilingExceeded,
                  "no converging setting within a trial time of " + std::to_string(*cap) + " s");
    }
    // The last doubling stops at the cap so trials get the full allowance.
    *trial_time = std::min(*trial_time * 2.0, *cap);
    out.schedule.push_back(*trial_time);
    note("trial_time", {{"round", std::int64_t{round_}}, {"seconds", *trial_time}});
  }
}

TuningOutcome TuningController::tune(BranchId parent, Searcher& searcher, double trial_time,
                                     const TrialBounds& bounds, std::optional<TrialBranch> incumbent,
                                     int trials_already_used) {
  std::optional<TrialBranch> best = std::move(incumbent);
  int used = trials_already_used;
  const std::optional<double> bound =
      bounds.max_trial_time ? std::optional<double>(std::min(*bounds.max_trial_time, trial_time))
                            : std::optional<double>(trial_time);

  while (!searcher.should_stop()) {
    if (bounds.max_trials > 0 && used >= bounds.max_trials) break;
    if (used >= config_.max_trials_per_round) break;
    auto setting = searcher.propose();
    if (!setting) break;
    BranchId id = link_.fork(parent, *setting);
    ++used;
    link_.run_for_seconds(id, trial_time, bound);
    Summary summary = summarize_branch(id);
    note_trial(id, bound);
    searcher.observe({*setting, observed_speed(summary)});
    if (summary.label == Label::kConverging && (!best || summary.speed > best->summary.speed)) {
      if (best) link_.free(best->id);
      best = TrialBranch{id, *setting, link_.record(id).run_time, summary};
    } else {
      link_.free(id);
    }
  }

  if (!best) throw Error(ErrorCode::kNoConvergingSetting, "no trial was converging within its bounds");
  TuningOutcome out;
  out.best_setting = best->setting;
  out.best_branch = best->id;
  out.trial_time = trial_time;
  out.trials_used = used;
  out.best_summary = best->summary;
  return out;
}

TuningOutcome TuningController::initial_tuning(BranchId parent, Searcher& searcher) {
  ++round_;
  note("round_begin", {{"round", std::int64_t{round_}}, {"kind", std::string("initial")}, {"max_trials", std::int64_t{0}}});
  TrialTimeDecision decision = decide_trial_time(parent, searcher);
  TuningOutcome outcome = tune(parent, searcher, decision.trial_time, {}, decision.best, decision.trials_used);
  note("round_end", {{"round", std::int64_t{round_}},
                     {"kind", std::string("initial")},
                     {"trials_used", std::int64_t{outcome.trials_used}},
                     {"trial_time", outcome.trial_time},
                     {"best_branch", outcome.best_branch.value},
                     {"best_setting", format_setting(outcome.best_setting)},
                     {"converged", false}});
  return outcome;
}

PlateauResult TuningController::run_until_plateau(BranchId branch, const PlateauPolicy& policy) {
  PlateauResult out;
  std::optional<double> best;
  int stale = 0;
  auto better = [&](double m, double ref) {
    const double margin = policy.min_relative_improvement * std::abs(ref);
    return policy.higher_is_better ? m > ref + margin : m < ref - margin;
  };

  while (out.epochs < policy.max_epochs) {
    const std::int64_t clocks = config_.clocks_per_epoch ? config_.clocks_per_epoch(branch) : 1;
    for (std::int64_t c = 0; c < clocks; ++c) {
      const std::int64_t clock = link_.total_clocks();
      const double progress = link_.step(branch);
      if (policy.stop_on_divergence && !std::isfinite(progress)) {
        out.reason = PlateauReason::kDiverged;
        out.cutoff_clock = clock;
        note("divergence_cutoff", {{"branch", branch.value}, {"clock", clock}});
        return out;
      }
    }
    BranchId probe = link_.fork(branch, {}, BranchType::kTesting);
    const double metric = link_.step(probe);
    link_.free(probe);
    ++out.epochs;
    out.metrics.push_back(metric);
    out.clocks.push_back(link_.total_clocks());
    out.times.push_back(link_.now());
    note("epoch", {{"branch", branch.value},
                   {"epoch", out.epochs},
                   {"metric", metric},
                   {"clock", link_.total_clocks()},
                   {"time", link_.now()}});

    if (policy.loss_threshold && !policy.higher_is_better && metric <= *policy.loss_threshold) {
      out.reason = PlateauReason::kThreshold;
      return out;
    }
    if (std::isfinite(metric) && (!best || better(metric, *best))) {
      best = metric;
      stale = 0;
    } else if (++stale >= policy.window) {
      out.reason = PlateauReason::kPlateau;
      return out;
    }
  }
  out.reason = PlateauReason::kHorizon;
  return out;
}

std::optional<TuningOutcome> TuningController::retune(BranchId current, const RetunePolicy& policy,
                                                      Searcher& searcher) {
  ++round_;
  const double epoch = policy.max_trial_time_per_setting > 0.0 ? policy.max_trial_time_per_setting
                                                               : epoch_seconds(current);
  note("round_begin", {{"round", std::int64_t{round_}},
                       {"kind", std::string("retune")},
                       {"max_trials", std::int64_t{policy.max_trials}},
                       {"max_trial_time", epoch}});
  TrialBounds bounds{epoch, policy.max_trials, true};
  auto converged = [&](int used) {
    note("round_end", {{"round", std::int64_t{round_}},
                       {"kind", std::string("retune")},
                       {"trials_used", std::int64_t{used}},
                       {"converged", true}});
    return std::nullopt;
  };

  TrialTimeDecision decision;
  try {
    decision = decide_trial_time(current, searcher, bounds);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kTrialTimeCeilingExceeded) throw;
    return converged(static_cast<int>(searcher.proposals()));
  }
  TuningOutcome outcome = tune(current, searcher, decision.trial_time, bounds, decision.best, decision.trials_used);
  note("round_end", {{"round", std::int64_t{round_}},
                     {"kind", std::string("retune")},
                     {"trials_used", std::int64_t{outcome.trials_used}},
                     {"trial_time", outcome.trial_time},
                     {"best_branch", outcome.best_branch.value},
                     {"best_setting", format_setting(outcome.best_setting)},
                     {"converged", false}});
  return outcome;
}

}  // namespace branchtune
