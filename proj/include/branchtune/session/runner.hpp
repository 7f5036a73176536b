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
#include <string>
#include <vector>

#include "branchtune/session/config.hpp"

namespace branchtune::session {

struct EpochPoint {
  std::int64_t lineage = 0;  // setting index for baselines, 0 otherwise
  std::int64_t branch = 0;
  std::int64_t epoch = 0;
  std::int64_t clock = 0;  // total clocks when the metric was taken
  double time = 0.0;       // simulated seconds at that point
  double metric = 0.0;
};

struct SessionResult {
  std::string mode;
  std::uint64_t seed = 0;
  double final_metric = 0.0;
  std::int64_t total_clocks = 0;
  double wall_seconds = 0.0;
  double overhead_fraction = 0.0;
  int retunes = 0;
  /// Clocks scheduled while a tuning round was in progress.
  std::int64_t tuning_clocks = 0;
  bool reached_threshold = false;
  std::string stop_reason;
  TunableSetting final_setting;
  std::vector<int> trials_per_round;
  std::vector<EpochPoint> epochs;
  std::int64_t final_branch = 0;
  std::size_t peak_live = 0;
  /// JSON-lines session log.
  std::string log_text;
  std::vector<std::string> warnings;
};

/// Runs the configured tuner end to end. When config.output_dir is set the
/// run also writes messages.jsonl, epochs.csv and result.json there.
SessionResult run_session(const SessionConfig& config);

void write_outputs(const SessionResult& result, const std::string& dir);
std::string result_json(const SessionResult& result);

/// Clock cost of one successive-halving bracket of budget B over n settings,
/// testing clocks included.
std::int64_t halving_bracket_clocks(std::int64_t budget, int settings);

}  // namespace branchtune::session
