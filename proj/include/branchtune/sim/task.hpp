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
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace branchtune::sim {

enum class TaskKind { kNoisyQuadratic, kLogisticBlobs, kMatrixFact };

std::string_view to_string(TaskKind kind);
std::optional<TaskKind> parse_task_kind(std::string_view text);

/// Seeded generator config for a synthetic learning task.
struct TaskSpec {
  TaskKind kind = TaskKind::kNoisyQuadratic;
  int samples = 2000;    // quadratic / logistic, before the validation split
  int features = 10;     // quadratic dimension / logistic features
  int rows = 100;        // matrix factorization
  int cols = 80;
  int rank = 5;
  double noise = 0.1;
  double separation = 4.0;  // logistic: distance between class means
  double condition = 10.0;  // quadratic: max curvature / min curvature
  std::uint64_t seed = 1;
  /// Loss tasks finish once the training objective reaches this value.
  std::optional<double> loss_threshold;
};

/// Named contiguous slice of the flat parameter vector.
struct ParamBlock {
  std::string key;
  std::size_t offset = 0;
  std::size_t size = 0;
};

class Task {
 public:
  virtual ~Task() = default;

  virtual TaskKind kind() const = 0;
  const std::vector<ParamBlock>& layout() const { return layout_; }
  std::size_t param_count() const { return param_count_; }
  virtual std::size_t train_size() const = 0;
  virtual std::size_t validation_size() const = 0;

  /// Root snapshot. Depends only on the task seed.
  virtual std::vector<double> initial_params() const = 0;

  /// Mean per-sample loss over `batch`; adds the mean gradient into `grad`.
  virtual double batch_loss_grad(std::span<const double> params, std::span<const std::size_t> batch,
                                 std::span<double> grad) const = 0;
  virtual double batch_loss(std::span<const double> params, std::span<const std::size_t> batch) const = 0;

  /// Full training objective.
  virtual double objective(std::span<const double> params) const = 0;
  /// Held-out accuracy for classification, the training objective otherwise.
  virtual double validation_metric(std::span<const double> params) const = 0;
  virtual bool metric_higher_is_better() const = 0;

  /// Appends the parameter indices whose gradient can be nonzero for
  /// `batch`, possibly with repeats. Returns false when every index may be.
  virtual bool touched_params(std::span<const std::size_t> batch, std::vector<std::size_t>& out) const {
    (void)batch;
    (void)out;
    return false;
  }

  /// Largest curvature of the objective where it is known in closed form.
  virtual std::optional<double> max_curvature() const { return std::nullopt; }

 protected:
  void add_block(std::string key, std::size_t size);

 private:
  std::vector<ParamBlock> layout_;
  std::size_t param_count_ = 0;
};

std::shared_ptr<const Task> make_task(const TaskSpec& spec);

}  // namespace branchtune::sim
