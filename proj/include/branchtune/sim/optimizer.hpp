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
#include <span>
#include <string_view>
#include <vector>

namespace branchtune::sim {

enum class OptimizerKind { kSgdMomentum, kAdaGrad, kRmsProp, kAdam };

std::string_view to_string(OptimizerKind kind);
std::optional<OptimizerKind> parse_optimizer_kind(std::string_view text);

/// Fixed optimizer hyperparameters. Learning rate and momentum are tunables
/// and are passed per step.
struct OptimizerSpec {
  OptimizerKind kind = OptimizerKind::kSgdMomentum;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double rms_decay = 0.9;
  double epsilon = 1e-8;
  /// Scale the step by (1 - momentum) before adding it to the velocity, so
  /// momentum smooths updates without enlarging them.
  bool dampened_momentum = false;
};

/// Per-branch accumulators; forked and freed with the branch.
struct OptimizerState {
  std::vector<double> velocity;
  std::vector<double> first;   // Adam first moment
  std::vector<double> second;  // AdaGrad sum / RMSProp average / Adam second moment
  std::int64_t steps = 0;
};

/// One update of `params` from gradient `grad`. The base rule produces a
/// step; momentum is then applied heavy-ball style on top of it:
///   v <- momentum * v - step;  params <- params + v
/// or, with dampened_momentum, v <- momentum * v - (1 - momentum) * step.
/// With zero momentum no velocity is kept, so it restarts from zero the next
/// time momentum is nonzero.
void apply_update(const OptimizerSpec& spec, OptimizerState& state, std::span<double> params,
                  std::span<const double> grad, double learning_rate, double momentum);

/// True when coordinates with zero gradient are left untouched by
/// apply_update, so updating only the touched ones gives the same result.
bool sparse_update_exact(const OptimizerSpec& spec, double momentum);

/// apply_update restricted to `indices` (distinct). Only valid when
/// sparse_update_exact holds.
void apply_sparse_update(const OptimizerSpec& spec, OptimizerState& state, std::span<double> params,
                         std::span<const double> grad, std::span<const std::size_t> indices, double learning_rate);

}  // namespace branchtune::sim
