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

#include "branchtune/sim/trainer.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numeric>

namespace branchtune::sim {

std::string_view to_string(TunableRole role) {
  switch (role) {
    case TunableRole::kLearningRate: return "learning_rate";
    case TunableRole::kMomentum: return "momentum";
    case TunableRole::kBatchSize: return "batch_size";
    case TunableRole::kStaleness: return "staleness";
  }
  return "?";
}

std::optional<TunableRole> parse_tunable_role(std::string_view text) {
  if (text == "learning_rate") return TunableRole::kLearningRate;
  if (text == "momentum") return TunableRole::kMomentum;
  if (text == "batch_size") return TunableRole::kBatchSize;
  if (text == "staleness") return TunableRole::kStaleness;
  return std::nullopt;
}

double aggregate_progress(std::span<const double> worker_losses) {
  double total = 0.0;
  for (double loss : worker_losses) total += loss;
  return total;
}

SimTrainer::SimTrainer(std::shared_ptr<const Task> task, TrainerConfig config)
    : task_(std::move(task)),
      config_(std::move(config)),
      store_(task_->layout(), static_cast<std::size_t>(std::max(config_.max_staleness, 0))),
      free_order_rng_(std::random_device{}()) {
  if (config_.workers < 1) throw Error(ErrorCode::kConfig, "need at least one worker");
  if (!config_.aggregate) config_.aggregate = aggregate_progress;
  const auto workers = static_cast<std::size_t>(config_.workers);

  shards_.resize(workers);
  for (std::size_t i = 0; i < task_->train_size(); ++i) shards_[i % workers].push_back(i);
  last_batches_.resize(workers);
  worker_grads_.assign(workers, std::vector<double>(task_->param_count(), 0.0));
  merged_grad_.assign(task_->param_count(), 0.0);
  worker_touched_.assign(workers, {});
  touched_mark_.assign(task_->param_count(), 0);

  store_.create(kRootBranch, task_->initial_params());
  BranchState root;
  root.tunables = resolve(config_.root, {});
  root.shuffle_rng.seed(config_.stream_seed);
  root.streams.resize(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    root.streams[w].order = shards_[w];
    std::shuffle(root.streams[w].order.begin(), root.streams[w].order.end(), root.shuffle_rng);
  }
  branches_.emplace(kRootBranch, std::move(root));
  used_ids_.insert(kRootBranch.value);
}

SimTrainer::BranchState& SimTrainer::state(BranchId branch) {
  auto it = branches_.find(branch);
  if (it == branches_.end())
    throw Error(ErrorCode::kUnknownBranch, "unknown branch " + std::to_string(branch.value));
  return it->second;
}

const SimTrainer::BranchState& SimTrainer::state(BranchId branch) const {
  auto it = branches_.find(branch);
  if (it == branches_.end())
    throw Error(ErrorCode::kUnknownBranch, "unknown branch " + std::to_string(branch.value));
  return it->second;
}

bool SimTrainer::live(BranchId branch) const { return branches_.count(branch) != 0; }
BranchType SimTrainer::type(BranchId branch) const { return state(branch).type; }
const Tunables& SimTrainer::tunables(BranchId branch) const { return state(branch).tunables; }
std::span<const double> SimTrainer::params(BranchId branch) const { return store_.current(branch); }

Tunables SimTrainer::resolve(const Tunables& base, const TunableSetting& setting) {
  Tunables out = base;
  for (const auto& [name, value] : setting) {
    auto bound = config_.binding.find(name);
    if (bound == config_.binding.end()) {
      if (warned_.insert(name).second)
        warnings_.push_back("tunable '" + name + "' is not bound to a trainer knob; ignored");
      continue;
    }
    switch (bound->second) {
      case TunableRole::kLearningRate: out.learning_rate = value; break;
      case TunableRole::kMomentum: out.momentum = value; break;
      case TunableRole::kBatchSize: out.batch_size = std::max(1, static_cast<int>(std::lround(value))); break;
      case TunableRole::kStaleness:
        out.staleness = std::clamp(static_cast<int>(std::lround(value)), 0, config_.max_staleness);
        break;
    }
  }
  out.batch_size = std::max(out.batch_size, 1);
  out.staleness = std::clamp(out.staleness, 0, config_.max_staleness);
  return out;
}

std::int64_t SimTrainer::clocks_per_epoch(int batch_size) const {
  std::size_t largest = 0;
  for (const auto& shard : shards_) largest = std::max(largest, shard.size());
  const auto b = static_cast<std::size_t>(std::max(batch_size, 1));
  return static_cast<std::int64_t>(std::max<std::size_t>((largest + b - 1) / b, 1));
}

std::int64_t SimTrainer::clocks_per_epoch(BranchId branch) const {
  return clocks_per_epoch(tunables(branch).batch_size);
}

double SimTrainer::clock_seconds(int batch_size) const {
  return config_.time.overhead +
         config_.time.per_sample * static_cast<double>(batch_size) * static_cast<double>(config_.workers);
}

double SimTrainer::test_seconds() const {
  const double samples = static_cast<double>(std::max(task_->validation_size(), task_->train_size()));
  return config_.time.overhead + config_.time.per_sample * samples / static_cast<double>(config_.workers);
}

void SimTrainer::fork_branch(ClockValue, BranchId branch, BranchId parent, const TunableSetting& setting,
                             BranchType type) {
  if (used_ids_.count(branch.value))
    throw Error(ErrorCode::kDuplicateBranch, "branch id " + std::to_string(branch.value) + " already used");
  auto it = branches_.find(parent);
  if (it == branches_.end() || it->second.type != BranchType::kTraining)
    throw Error(ErrorCode::kUnknownParent, "fork from unknown parent " + std::to_string(parent.value));

  BranchState child;
  child.type = type;
  if (type == BranchType::kTesting) {
    // Read-only view of the parent: the metric of the snapshot is all a
    // testing branch ever reports.
    child.tunables = it->second.tunables;
    child.test_metric = task_->validation_metric(store_.current(parent));
  } else {
    store_.fork(branch, parent);
    const BranchState& from = it->second;
    child.tunables = resolve(from.tunables, setting);
    child.optimizer = from.optimizer;
    child.streams = from.streams;
    child.shuffle_rng = from.shuffle_rng;
  }
  used_ids_.insert(branch.value);
  branches_.emplace(branch, std::move(child));
}

void SimTrainer::next_batch(BranchState& st, std::size_t worker, std::size_t size,
                            std::vector<std::size_t>& out) {
  out.clear();
  WorkerStream& stream = st.streams[worker];
  if (stream.order.empty()) return;
  while (out.size() < size) {
    if (stream.cursor >= stream.order.size()) {
      std::shuffle(stream.order.begin(), stream.order.end(), st.shuffle_rng);
      stream.cursor = 0;
      ++stream.epoch;
    }
    out.push_back(stream.order[stream.cursor++]);
  }
}

std::vector<double> SimTrainer::run_clock(BranchId branch) {
  BranchState& st = state(branch);
  if (st.type != BranchType::kTraining)
    throw Error(ErrorCode::kWrongBranchType, "run_clock on a TESTING branch");

  const auto workers = static_cast<std::size_t>(config_.workers);
  const auto staleness = static_cast<std::int64_t>(st.tunables.staleness);
  const std::int64_t step = store_.version_count(branch);
  const auto available = static_cast<std::int64_t>(store_.available_lag(branch));

  std::vector<double> losses(workers, 0.0);
  bool sparse = true;
  for (std::size_t w = 0; w < workers; ++w) {
    std::int64_t lag = staleness == 0 ? 0 : (step + static_cast<std::int64_t>(w)) % (staleness + 1);
    lag = std::min(lag, available);
    assert(lag <= staleness);
    max_lag_ = std::max(max_lag_, lag);
    auto view = store_.version(branch, static_cast<std::size_t>(lag));
    next_batch(st, w, static_cast<std::size_t>(st.tunables.batch_size), last_batches_[w]);
    worker_touched_[w].clear();
    sparse = task_->touched_params(last_batches_[w], worker_touched_[w]) && sparse;
    if (!last_batches_[w].empty())
      losses[w] = task_->batch_loss_grad(view, last_batches_[w], worker_grads_[w]);
  }

  std::vector<std::size_t> order(workers);
  std::iota(order.begin(), order.end(), 0);
  if (!config_.deterministic) std::shuffle(order.begin(), order.end(), free_order_rng_);
  const double inv = 1.0 / static_cast<double>(workers);
  store_.advance(branch);

  if (sparse) {
    // Same summation order as the dense merge; untouched entries add zeros.
    touched_union_.clear();
    for (std::size_t w : order)
      for (std::size_t i : worker_touched_[w]) {
        if (touched_mark_[i] == 0) {
          touched_mark_[i] = 1;
          touched_union_.push_back(i);
        }
      }
    for (std::size_t w : order)
      for (std::size_t i : touched_union_) merged_grad_[i] += worker_grads_[w][i];
    for (std::size_t i : touched_union_) merged_grad_[i] *= inv;
    if (sparse_update_exact(config_.optimizer, st.tunables.momentum))
      apply_sparse_update(config_.optimizer, st.optimizer, store_.current(branch), merged_grad_, touched_union_,
                          st.tunables.learning_rate);
    else
      apply_update(config_.optimizer, st.optimizer, store_.current(branch), merged_grad_,
                   st.tunables.learning_rate, st.tunables.momentum);
    for (std::size_t i : touched_union_) {
      touched_mark_[i] = 0;
      merged_grad_[i] = 0.0;
      for (auto& g : worker_grads_) g[i] = 0.0;
    }
  } else {
    for (std::size_t w : order)
      for (std::size_t i = 0; i < merged_grad_.size(); ++i) merged_grad_[i] += worker_grads_[w][i];
    for (auto& g : merged_grad_) g *= inv;
    apply_update(config_.optimizer, st.optimizer, store_.current(branch), merged_grad_,
                 st.tunables.learning_rate, st.tunables.momentum);
    std::fill(merged_grad_.begin(), merged_grad_.end(), 0.0);
    for (auto& g : worker_grads_) std::fill(g.begin(), g.end(), 0.0);
  }

  now_ += clock_seconds(st.tunables.batch_size);
  ++clocks_run_;

  if (!config_.deterministic) {
    std::vector<double> shuffled(workers);
    for (std::size_t k = 0; k < workers; ++k) shuffled[k] = losses[order[k]];
    return shuffled;
  }
  return losses;
}

double SimTrainer::test_branch(BranchId branch) const {
  const BranchState& st = state(branch);
  if (st.type != BranchType::kTesting)
    throw Error(ErrorCode::kWrongBranchType, "branch " + std::to_string(branch.value) + " is not a TESTING branch");
  return st.test_metric;
}

void SimTrainer::free_branch(ClockValue, BranchId branch) {
  auto it = branches_.find(branch);
  if (it == branches_.end())
    throw Error(ErrorCode::kUnknownBranch, "free of unknown branch " + std::to_string(branch.value));
  if (it->second.type == BranchType::kTraining) store_.free(branch);
  branches_.erase(it);
}

std::size_t SimTrainer::samples_last_clock() const {
  std::size_t total = 0;
  for (const auto& batch : last_batches_) total += batch.size();
  return total;
}

std::optional<protocol::ReportProgress> SimTrainer::handle(const protocol::Message& msg) {
  if (const auto* fork = std::get_if<protocol::ForkBranch>(&msg)) {
    fork_branch(fork->clock, fork->branch, fork->parent, fork->setting, fork->type);
    return std::nullopt;
  }
  if (const auto* free = std::get_if<protocol::FreeBranch>(&msg)) {
    free_branch(free->clock, free->branch);
    return std::nullopt;
  }
  if (const auto* sched = std::get_if<protocol::ScheduleBranch>(&msg)) {
    const BranchState& st = state(sched->branch);
    if (st.type == BranchType::kTesting) {
      now_ += test_seconds();
      ++clocks_run_;
      return protocol::ReportProgress{sched->clock, st.test_metric};
    }
    auto losses = run_clock(sched->branch);
    return protocol::ReportProgress{sched->clock, config_.aggregate(losses)};
  }
  throw Error(ErrorCode::kInvalidArgument, "trainer received a progress report");
}

namespace {

// Trains the root branch one epoch at a time. Stops after max_epochs, on a
// non-finite loss, or once the loss moved less than 1% over 10 epochs when
// `until_flat` is set. Returns the last finite objective.
double train_root(const std::shared_ptr<const Task>& task, const TrainerConfig& config, double lr, int max_epochs,
                  bool until_flat) {
  TrainerConfig cfg = config;
  cfg.root.learning_rate = lr;
  cfg.deterministic = true;
  SimTrainer trainer(task, cfg);
  const std::int64_t epoch = trainer.clocks_per_epoch(kRootBranch);
  std::vector<double> history;
  for (int e = 0; e < max_epochs; ++e) {
    for (std::int64_t c = 0; c < epoch; ++c) trainer.run_clock(kRootBranch);
    const double loss = task->objective(trainer.params(kRootBranch));
    if (!std::isfinite(loss)) break;
    history.push_back(loss);
    if (until_flat && history.size() > 10) {
      const double before = history[history.size() - 11];
      if (before - loss < 0.01 * before) break;
    }
  }
  return history.empty() ? std::numeric_limits<double>::infinity() : history.back();
}

}  // namespace

double calibrate_loss_threshold(const std::shared_ptr<const Task>& task, const TrainerConfig& config,
                                const std::vector<double>& learning_rates, int max_epochs, int probe_epochs) {
  double chosen = 0.0;
  double best_early = std::numeric_limits<double>::infinity();
  for (double lr : learning_rates) {
    const double early = train_root(task, config, lr, probe_epochs, false);
    if (early < best_early) {
      best_early = early;
      chosen = lr;
    }
  }
  if (!std::isfinite(best_early)) return best_early;
  return train_root(task, config, chosen, max_epochs, true);
}

}  // namespace branchtune::sim
