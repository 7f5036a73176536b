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

#include <span>
#include <string_view>
#include <vector>

namespace branchtune {

struct TracePoint {
  double t = 0.0;  // seconds
  double x = 0.0;  // loss
};

/// Timestamped progress of one branch. Timestamps strictly increase.
using ProgressTrace = std::vector<TracePoint>;

struct SummarizerConfig {
  int k = 10;
  /// Stability threshold; non-positive means 1/k.
  double epsilon = 0.0;

  double effective_epsilon() const { return epsilon > 0.0 ? epsilon : 1.0 / k; }
};

enum class Label { kConverging, kDiverged, kUnstable };

std::string_view to_string(Label label);

struct Summary {
  double speed = 0.0;
  double noise = 0.0;
  double range_x = 0.0;
  double range_t = 0.0;
  Label label = Label::kUnstable;
};

/// Splits the trace by index into min(k, N) contiguous windows and averages
/// t and x within each. The first N mod k' windows hold one extra point.
ProgressTrace downsample(std::span<const TracePoint> trace, int k);

/// Largest rise between adjacent windows, floored at zero.
double noise(std::span<const TracePoint> windows);

/// Noise-penalized convergence speed and stability label of a raw trace.
Summary summarize(std::span<const TracePoint> trace, const SummarizerConfig& config = {});

}  // namespace branchtune
