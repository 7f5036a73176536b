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
#include <optional>
#include <set>
#include <vector>

#include "branchtune/event_log.hpp"
#include "branchtune/searcher.hpp"
#include "branchtune/summarizer.hpp"
#include "branchtune/transport.hpp"

namespace branchtune {

/// What the tuner knows about one branch it forked.
struct BranchRecord {
  BranchId id;
  BranchId parent;
  TunableSetting setting;
  BranchType type = BranchType::kTraining;
  ProgressTrace trace;     // t = branch-local run time at the end of each clock
  double run_time = 0.0;   // seconds this branch has been scheduled
  std::int64_t clocks = 0;
  std::optional<double> per_clock;  // from the probe
  bool live = true;
};

/// Tuner-side handle on the training backend: owns the global clock, emits
/// protocol messages in clock order, and keeps per-branch traces.
class BranchLink {
 public:
  BranchLink(Transport& transport, const TimeSource& time, EventLog* log = nullptr);

  BranchId fork(BranchId parent, const TunableSetting& setting, BranchType type = BranchType::kTraining);
  void free(BranchId branch);
  /// Schedules exactly one clock and returns the reported progress.
  double step(BranchId branch);
  void run_clocks(BranchId branch, std::int64_t clocks);
  /// Runs for about `seconds` more: a 3-clock probe fixes the per-clock time
  /// of a new branch, the rest is converted to clocks rounding up. With
  /// `max_run_time` the branch's total run time never exceeds that bound.
  void run_for_seconds(BranchId branch, double seconds, std::optional<double> max_run_time = std::nullopt);
  /// Per-clock seconds, probing with 3 clocks if still unknown.
  double per_clock_seconds(BranchId branch, std::optional<double> max_run_time = std::nullopt);
  /// Probed per-clock time, else the average over clocks run so far.
  std::optional<double> measured_per_clock(BranchId branch) const;

  const BranchRecord& record(BranchId branch) const;
  bool live(BranchId branch) const;
  std::size_t live_count() const { return live_.size(); }
  std::size_t peak_live() const { return peak_live_; }
  ClockValue clock() const { return clock_; }
  std::int64_t total_clocks() const { return clock_.value; }
  const std::map<std::int64_t, BranchRecord>& records() const { return records_; }
  EventLog* log() const { return log_; }
  double now() const { return time_.now(); }

  /// Clocks spent on TRAINING branches outside the lineage of `survivor`.
  std::int64_t clocks_outside_lineage(BranchId survivor) const;

  static constexpr int kProbeClocks = 3;

 private:
  void send(const protocol::Message& msg);
  BranchRecord& mutable_record(BranchId branch);

  Transport& transport_;
  const TimeSource& time_;
  EventLog* log_;
  ClockValue clock_{0};
  std::int64_t next_id_ = 1;
  std::map<std::int64_t, BranchRecord> records_;
  std::set<std::int64_t> live_;
  std::size_t peak_live_ = 1;
  std::optional<std::int64_t> last_scheduled_;
};

struct TrialBranch {
  BranchId id;
  TunableSetting setting;
  double run_time = 0.0;
  Summary summary;
};

struct TrialTimeDecision {
  double trial_time = 0.0;
  std::vector<double> schedule;  // every trial time tried, in order
  TrialBranch best;
  int trials_used = 0;
};

struct TuningOutcome {
  TunableSetting best_setting;
  BranchId best_branch;
  double trial_time = 0.0;
  int trials_used = 0;
  Summary best_summary;
};

/// Limits for one tuning round.
struct TrialBounds {
  std::optional<double> max_trial_time;  // seconds
  int max_trials = 0;                    // 0 = unlimited
  /// Once the trial time reaches the cap, keep trying new settings at the
  /// cap until max_trials is used up instead of stopping right away.
  bool exhaust_at_cap = false;
};

struct RetunePolicy {
  double max_trial_time_per_setting = 0.0;  // one epoch of the current branch
  int max_trials = 0;                       // previous round's trials
  int plateau_window = 5;
};

struct PlateauPolicy {
  int window = 5;
  bool higher_is_better = true;
  /// Required relative gain over the best so far to count as improving.
  double min_relative_improvement = 0.0;
  /// Loss tasks finish when the metric reaches this value.
  std::optional<double> loss_threshold;
  int max_epochs = 1000;
  /// Stop at the first non-finite training progress.
  bool stop_on_divergence = false;
};

enum class PlateauReason { kPlateau, kThreshold, kHorizon, kDiverged };

std::string_view to_string(PlateauReason reason);

struct PlateauResult {
  PlateauReason reason = PlateauReason::kPlateau;
  std::vector<double> metrics;     // one per epoch
  std::vector<std::int64_t> clocks;  // total clocks after each test
  std::vector<double> times;       // backend seconds after each test
  std::int64_t epochs = 0;
  std::optional<std::int64_t> cutoff_clock;  // kDiverged only
};

/// Returns clocks per epoch for a live branch.
using EpochModel = std::function<std::int64_t(BranchId)>;

struct ControllerConfig {
  SummarizerConfig summarizer;
  /// Smallest trial time in seconds. Unset: max(searcher decision time,
  /// floor_probe_clocks clocks of the parent or of the first trial).
  std::optional<double> trial_time_floor;
  int floor_probe_clocks = 5;
  /// Initial tuning gives up past this many epochs of trial time.
  double trial_time_cap_epochs = 64.0;
  std::optional<double> trial_time_cap;  // seconds; overrides the epoch-based cap
  /// Hard stop on trials in a round with no other bound.
  int max_trials_per_round = 200;
  /// Searcher decision time: measured wall time when true, else modeled.
  bool measure_decision_time = false;
  double modeled_decision_seconds = 0.0;
  EpochModel clocks_per_epoch;
};

/// The tuning procedure on top of a BranchLink.
class TuningController {
 public:
  TuningController(BranchLink& link, ControllerConfig config);

  /// Trial-time doubling until some setting is CONVERGING. Survivors other
  /// than the best are freed before returning. Throws
  /// Error(kTrialTimeCeilingExceeded) after freeing every trial branch.
  TrialTimeDecision decide_trial_time(BranchId parent, Searcher& searcher, const TrialBounds& bounds = {});

  /// Proposes, forks from `parent`, runs each trial for `trial_time`, keeps
  /// the faster of {best, trial}. `incumbent` carries a best branch (already
  /// observed) from decide_trial_time. Throws Error(kNoConvergingSetting).
  TuningOutcome tune(BranchId parent, Searcher& searcher, double trial_time, const TrialBounds& bounds = {},
                     std::optional<TrialBranch> incumbent = std::nullopt, int trials_already_used = 0);

  /// Initial round: decide_trial_time then tune, with the epoch-based cap.
  TuningOutcome initial_tuning(BranchId parent, Searcher& searcher);

  /// Trains `branch` an epoch at a time, testing after each epoch, until
  /// the metric plateaus, reaches the loss threshold, or hits max_epochs.
  PlateauResult run_until_plateau(BranchId branch, const PlateauPolicy& policy);

  /// Bounded tuning from the plateaued branch. nullopt means converged.
  std::optional<TuningOutcome> retune(BranchId current, const RetunePolicy& policy, Searcher& searcher);

  /// Seconds of one epoch on `branch`; `per_clock` stands in when the
  /// branch has no measurement yet. Infinite without an epoch model.
  double epoch_seconds(BranchId branch, std::optional<double> per_clock = std::nullopt) const;
  int rounds() const { return round_; }

  const ControllerConfig& config() const { return config_; }
  BranchLink& link() { return link_; }

 private:
  double propose_timed(Searcher& searcher, std::optional<TunableSetting>& out);
  Summary summarize_branch(BranchId branch);
  void note(std::string_view event, std::vector<Field> fields);
  void note_trial(BranchId branch, std::optional<double> bound);

  BranchLink& link_;
  ControllerConfig config_;
  int round_ = 0;
};

}  // namespace branchtune
