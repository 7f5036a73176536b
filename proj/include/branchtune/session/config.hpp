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
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "branchtune/search_space.hpp"
#include "branchtune/searcher.hpp"
#include "branchtune/sim/optimizer.hpp"
#include "branchtune/sim/task.hpp"
#include "branchtune/sim/trainer.hpp"

namespace branchtune::session {

enum class TunerMode { kMltuner, kFullrun, kHalving, kFixed };

std::string_view to_string(TunerMode mode);
std::optional<TunerMode> parse_tuner_mode(std::string_view text);

struct HalvingOptions {
  int settings = 4;                     // n per bracket, a power of two
  std::int64_t initial_budget = 0;      // B0 in clocks; 0 means n epochs of the root
  std::int64_t clock_cap = 0;           // stop before a bracket would pass this; 0 means 16 * B0
  bool use_training_loss = false;       // rank survivors by training loss instead of the validation metric
};

struct TunerOptions {
  TunerMode mode = TunerMode::kMltuner;
  bool initial_tuning = true;
  /// Starting setting when initial tuning is off, and the whole setting in
  /// fixed mode.
  TunableSetting fixed_setting;
  bool retune = true;
  int max_retunes = 50;
  /// Trial budget of the first re-tune when there was no initial round.
  int first_retune_max_trials = 20;
  int plateau_window = 5;
  /// Relative improvement an epoch must make to reset the plateau window.
  double plateau_tolerance = 0.0;
  /// Stop loss tasks once the metric reaches the task's threshold.
  bool stop_at_threshold = true;
  /// Session horizon in epochs (per setting for the full-run baseline).
  int max_epochs = 200;
  std::optional<double> trial_time_floor;
  double trial_time_cap_epochs = 64.0;
  int fullrun_settings = 10;
  HalvingOptions halving;
};

enum class TransportKind { kInProcess, kRecord };

struct SessionConfig {
  sim::TaskSpec task;
  sim::OptimizerSpec optimizer;
  int workers = 4;
  int max_staleness = 7;
  sim::TimeModel time;
  sim::Tunables root;
  SearchSpace space;
  sim::TunableBinding binding;
  SearchAlgorithm algorithm = SearchAlgorithm::kTpe;
  int grid_points = 10;
  TunerOptions tuner;
  std::uint64_t seed = 1;
  bool deterministic = true;
  TransportKind transport = TransportKind::kRecord;
  std::string output_dir;

  /// Throws Error(kConfig) on inconsistent settings.
  void validate() const;
};

using Override = std::pair<std::string, std::string>;

/// Parses JSON config text, applying dotted-name overrides first
/// ("tuner.mode" = "fixed"). Override values are read as JSON when they
/// parse, otherwise as strings. With check=false the cross-field checks of
/// SessionConfig::validate are skipped.
SessionConfig parse_config(std::string_view json_text, const std::vector<Override>& overrides = {},
                           bool check = true);
SessionConfig load_config(const std::string& path, const std::vector<Override>& overrides = {});

/// Trainer configuration implied by a session config.
sim::TrainerConfig trainer_config(const SessionConfig& config);

}  // namespace branchtune::session
