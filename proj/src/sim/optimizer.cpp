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

#include "branchtune/sim/optimizer.hpp"

#include <cmath>

namespace branchtune::sim {

std::string_view to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::kSgdMomentum: return "SGD_MOMENTUM";
    case OptimizerKind::kAdaGrad: return "ADAGRAD";
    case OptimizerKind::kRmsProp: return "RMSPROP";
    case OptimizerKind::kAdam: return "ADAM";
  }
  return "?";
}

std::optional<OptimizerKind> parse_optimizer_kind(std::string_view text) {
  if (text == "SGD_MOMENTUM" || text == "SGD") return OptimizerKind::kSgdMomentum;
  if (text == "ADAGRAD") return OptimizerKind::kAdaGrad;
  if (text == "RMSPROP") return OptimizerKind::kRmsProp;
  if (text == "ADAM") return OptimizerKind::kAdam;
  return std::nullopt;
}

namespace {

double base_step(const OptimizerSpec& spec, OptimizerState& state, std::size_t i, double g, double learning_rate,
                 double bias1, double bias2) {
  double step = 0.0;
  switch (spec.kind) {
    case OptimizerKind::kSgdMomentum:
      step = learning_rate * g;
      break;
    case OptimizerKind::kAdaGrad:
      state.second[i] += g * g;
      step = learning_rate * g / (std::sqrt(state.second[i]) + spec.epsilon);
      break;
    case OptimizerKind::kRmsProp:
      state.second[i] = spec.rms_decay * state.second[i] + (1.0 - spec.rms_decay) * g * g;
      step = learning_rate * g / (std::sqrt(state.second[i]) + spec.epsilon);
      break;
    case OptimizerKind::kAdam: {
      state.first[i] = spec.beta1 * state.first[i] + (1.0 - spec.beta1) * g;
      state.second[i] = spec.beta2 * state.second[i] + (1.0 - spec.beta2) * g * g;
      const double m_hat = state.first[i] / bias1;
      const double v_hat = state.second[i] / bias2;
      step = learning_rate * m_hat / (std::sqrt(v_hat) + spec.epsilon);
      break;
    }
  }
  return step;
}

void prepare(const OptimizerSpec& spec, OptimizerState& state, std::size_t n) {
  if (spec.kind != OptimizerKind::kSgdMomentum && state.second.size() != n) state.second.assign(n, 0.0);
  if (spec.kind == OptimizerKind::kAdam && state.first.size() != n) state.first.assign(n, 0.0);
  ++state.steps;
}

}  // namespace

void apply_update(const OptimizerSpec& spec, OptimizerState& state, std::span<double> params,
                  std::span<const double> grad, double learning_rate, double momentum) {
  const std::size_t n = params.size();
  prepare(spec, state, n);
  double bias1 = 1.0;
  double bias2 = 1.0;
  if (spec.kind == OptimizerKind::kAdam) {
    bias1 = 1.0 - std::pow(spec.beta1, static_cast<double>(state.steps));
    bias2 = 1.0 - std::pow(spec.beta2, static_cast<double>(state.steps));
  }

  if (momentum == 0.0) {
    state.velocity.clear();
    for (std::size_t i = 0; i < n; ++i) params[i] -= base_step(spec, state, i, grad[i], learning_rate, bias1, bias2);
    return;
  }
  if (state.velocity.size() != n) state.velocity.assign(n, 0.0);
  const double gain = spec.dampened_momentum ? 1.0 - momentum : 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double step = base_step(spec, state, i, grad[i], learning_rate, bias1, bias2);
    state.velocity[i] = momentum * state.velocity[i] - gain * step;
    params[i] += state.velocity[i];
  }
}

bool sparse_update_exact(const OptimizerSpec& spec, double momentum) {
  return momentum == 0.0 && (spec.kind == OptimizerKind::kSgdMomentum || spec.kind == OptimizerKind::kAdaGrad);
}

void apply_sparse_update(const OptimizerSpec& spec, OptimizerState& state, std::span<double> params,
                         std::span<const double> grad, std::span<const std::size_t> indices, double learning_rate) {
  prepare(spec, state, params.size());
  state.velocity.clear();
  for (std::size_t i : indices) params[i] -= base_step(spec, state, i, grad[i], learning_rate, 1.0, 1.0);
}

}  // namespace branchtune::sim
