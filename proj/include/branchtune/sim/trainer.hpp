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

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "branchtune/sim/optimizer.hpp"
#include "branchtune/sim/param_store.hpp"
#include "branchtune/sim/task.hpp"
#include "branchtune/transport.hpp"

namespace branchtune::sim {

enum class TunableRole { kLearningRate, kMomentum, kBatchSize, kStaleness };

std::string_view to_string(TunableRole role);
std::optional<TunableRole> parse_tunable_role(std::string_view text);

/// Maps search-space names onto the knobs the trainer understands. Names
/// not in the binding are ignored (with one warning per name).
using TunableBinding = std::map<std::string, TunableRole>;

/// Effective training knobs of one branch.
struct Tunables {
  double learning_rate = 0.01;
  double momentum = 0.0;
  int batch_size = 32;  // per worker
  int staleness = 0;
};

/// Simulated seconds per clock: overhead + per_sample * samples processed.
struct TimeModel {
  double overhead = 0.01;
  double per_sample = 1e-4;
};

using ProgressAggregator = std::function<double(std::span<const double>)>;

struct TrainerConfig {
  int workers = 4;
  TunableBinding binding;
  OptimizerSpec optimizer;
  TimeModel time;
  Tunables root;  // knobs of the root branch before any fork
  int max_staleness = 7;
  std::uint64_t stream_seed = 1;
  /// Fixed worker order for reductions. When false the order is randomized
  /// per clock from a non-deterministic source.
  bool deterministic = true;
  ProgressAggregator aggregate;  // empty means sum
};

/// Sum over workers, in the given order.
double aggregate_progress(std::span<const double> worker_losses);

/// Desk-scale data-parallel trainer with branch-versioned state.
class SimTrainer final : public TrainerEndpoint, public TimeSource {
 public:
  SimTrainer(std::shared_ptr<const Task> task, TrainerConfig config);

  std::optional<protocol::ReportProgress> handle(const protocol::Message& msg) override;
  double now() const override { return now_; }

  void fork_branch(ClockValue clock, BranchId branch, BranchId parent, const TunableSetting& setting,
                   BranchType type);
  /// One data-parallel step; returns per-worker mean batch losses.
  std::vector<double> run_clock(BranchId branch);
  /// Validation metric of a TESTING branch's snapshot.
  double test_branch(BranchId branch) const;
  void free_branch(ClockValue clock, BranchId branch);

  bool live(BranchId branch) const;
  BranchType type(BranchId branch) const;
  const Tunables& tunables(BranchId branch) const;
  std::span<const double> params(BranchId branch) const;
  std::int64_t clocks_per_epoch(int batch_size) const;
  std::int64_t clocks_per_epoch(BranchId branch) const;
  double clock_seconds(int batch_size) const;
  double test_seconds() const;
  Tunables resolve(const Tunables& base, const TunableSetting& setting);

  const Task& task() const { return *task_; }
  const TrainerConfig& config() const { return config_; }
  const BranchedParamStore& store() const { return store_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  /// Largest parameter lag any worker has read so far.
  std::int64_t max_observed_lag() const { return max_lag_; }
  /// Sample indices each worker used in the last clock.
  const std::vector<std::vector<std::size_t>>& last_batches() const { return last_batches_; }
  std::size_t samples_last_clock() const;
  std::int64_t clocks_run() const { return clocks_run_; }

 private:
  struct WorkerStream {
    std::vector<std::size_t> order;
    std::size_t cursor = 0;
    std::int64_t epoch = 0;
  };
  struct BranchState {
    BranchType type = BranchType::kTraining;
    Tunables tunables;
    OptimizerState optimizer;
    std::vector<WorkerStream> streams;
    std::mt19937_64 shuffle_rng;
    double test_metric = 0.0;  // TESTING only
  };

  BranchState& state(BranchId branch);
  const BranchState& state(BranchId branch) const;
  void next_batch(BranchState& st, std::size_t worker, std::size_t size, std::vector<std::size_t>& out);

  std::shared_ptr<const Task> task_;
  TrainerConfig config_;
  BranchedParamStore store_;
  std::unordered_map<BranchId, BranchState> branches_;
  std::set<std::int64_t> used_ids_;
  std::set<std::string> warned_;
  std::vector<std::string> warnings_;
  std::vector<std::vector<std::size_t>> shards_;
  std::vector<std::vector<std::size_t>> last_batches_;
  std::vector<std::vector<double>> worker_grads_;
  std::vector<double> merged_grad_;
  // Gradient buffers are all zero between clocks. Sparse tasks clear only
  // the indices they touched.
  std::vector<std::vector<std::size_t>> worker_touched_;
  std::vector<std::size_t> touched_union_;
  std::vector<char> touched_mark_;
  std::mt19937_64 free_order_rng_;
  double now_ = 0.0;
  std::int64_t max_lag_ = 0;
  std::int64_t clocks_run_ = 0;
};

/// Threshold recipe for loss tasks. The good setting is the candidate
/// learning rate with the lowest objective after `probe_epochs`; it is then
/// trained until the objective changes by less than 1% over 10 epochs (or
/// max_epochs) and the objective reached is returned. Infinite when every
/// candidate diverges.
double calibrate_loss_threshold(const std::shared_ptr<const Task>& task, const TrainerConfig& config,
                                const std::vector<double>& learning_rates, int max_epochs = 400,
                                int probe_epochs = 20);

}  // namespace branchtune::sim
