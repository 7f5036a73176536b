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

#include "branchtune/sim/task.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "branchtune/types.hpp"

namespace branchtune::sim {

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::kNoisyQuadratic: return "NOISY_QUADRATIC";
    case TaskKind::kLogisticBlobs: return "LOGISTIC_BLOBS";
    case TaskKind::kMatrixFact: return "MATRIX_FACT";
  }
  return "?";
}

std::optional<TaskKind> parse_task_kind(std::string_view text) {
  if (text == "NOISY_QUADRATIC") return TaskKind::kNoisyQuadratic;
  if (text == "LOGISTIC_BLOBS") return TaskKind::kLogisticBlobs;
  if (text == "MATRIX_FACT") return TaskKind::kMatrixFact;
  return std::nullopt;
}

void Task::add_block(std::string key, std::size_t size) {
  layout_.push_back({std::move(key), param_count_, size});
  param_count_ += size;
}

namespace {

// Sample i has loss 0.5 * sum_j a_j (w_j - c_ij)^2. The batch-mean gradient is
// a * (w - mean c), so plain SGD is stable iff lr < 2 / max(a).
class NoisyQuadratic final : public Task {
 public:
  explicit NoisyQuadratic(const TaskSpec& spec) : dim_(static_cast<std::size_t>(spec.features)) {
    if (spec.features < 1 || spec.samples < 2) throw Error(ErrorCode::kConfig, "quadratic task too small");
    add_block("w", dim_);
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    curvature_.resize(dim_);
    for (std::size_t j = 0; j < dim_; ++j) {
      double frac = dim_ == 1 ? 1.0 : static_cast<double>(j) / static_cast<double>(dim_ - 1);
      curvature_[j] = std::pow(spec.condition, frac);
    }
    optimum_.resize(dim_);
    for (auto& v : optimum_) v = gauss(rng);
    n_train_ = static_cast<std::size_t>(spec.samples);
    centers_.resize(n_train_ * dim_);
    for (std::size_t i = 0; i < n_train_; ++i)
      for (std::size_t j = 0; j < dim_; ++j) centers_[i * dim_ + j] = optimum_[j] + spec.noise * gauss(rng);
    init_.resize(dim_);
    for (auto& v : init_) v = 3.0 * gauss(rng);
  }

  TaskKind kind() const override { return TaskKind::kNoisyQuadratic; }
  std::size_t train_size() const override { return n_train_; }
  std::size_t validation_size() const override { return 0; }
  std::vector<double> initial_params() const override { return init_; }

  double sample_loss(std::span<const double> w, std::size_t i) const {
    double loss = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) {
      double d = w[j] - centers_[i * dim_ + j];
      loss += 0.5 * curvature_[j] * d * d;
    }
    return loss;
  }

  double batch_loss_grad(std::span<const double> w, std::span<const std::size_t> batch,
                         std::span<double> grad) const override {
    const double inv = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (std::size_t i : batch) {
      loss += sample_loss(w, i);
      for (std::size_t j = 0; j < dim_; ++j) grad[j] += inv * curvature_[j] * (w[j] - centers_[i * dim_ + j]);
    }
    return loss * inv;
  }

  double batch_loss(std::span<const double> w, std::span<const std::size_t> batch) const override {
    double loss = 0.0;
    for (std::size_t i : batch) loss += sample_loss(w, i);
    return loss / static_cast<double>(batch.size());
  }

  double objective(std::span<const double> w) const override {
    double loss = 0.0;
    for (std::size_t i = 0; i < n_train_; ++i) loss += sample_loss(w, i);
    return loss / static_cast<double>(n_train_);
  }

  double validation_metric(std::span<const double> w) const override { return objective(w); }
  bool metric_higher_is_better() const override { return false; }
  std::optional<double> max_curvature() const override {
    return *std::max_element(curvature_.begin(), curvature_.end());
  }

 private:
  std::size_t dim_;
  std::size_t n_train_ = 0;
  std::vector<double> curvature_;
  std::vector<double> optimum_;
  std::vector<double> centers_;
  std::vector<double> init_;
};

// Two Gaussian blobs at +/- separation/2 along a random unit direction.
class LogisticBlobs final : public Task {
 public:
  explicit LogisticBlobs(const TaskSpec& spec) : dim_(static_cast<std::size_t>(spec.features)) {
    if (spec.features < 1 || spec.samples < 10) throw Error(ErrorCode::kConfig, "logistic task too small");
    add_block("w", dim_);
    add_block("b", 1);
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> direction(dim_);
    double norm = 0.0;
    for (auto& v : direction) {
      v = gauss(rng);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (auto& v : direction) v /= norm;

    const auto n = static_cast<std::size_t>(spec.samples);
    std::vector<double> x(n * dim_);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double sign = (i % 2 == 0) ? 1.0 : -1.0;
      y[i] = sign;
      for (std::size_t j = 0; j < dim_; ++j)
        x[i * dim_ + j] = sign * 0.5 * spec.separation * direction[j] + spec.noise * gauss(rng);
    }
    n_valid_ = n / 5;
    n_train_ = n - n_valid_;
    x_ = std::move(x);
    y_ = std::move(y);
    init_.resize(dim_ + 1);
    for (auto& v : init_) v = 0.01 * gauss(rng);
  }

  TaskKind kind() const override { return TaskKind::kLogisticBlobs; }
  std::size_t train_size() const override { return n_train_; }
  std::size_t validation_size() const override { return n_valid_; }
  std::vector<double> initial_params() const override { return init_; }

  double margin(std::span<const double> p, std::size_t i) const {
    double z = p[dim_];
    for (std::size_t j = 0; j < dim_; ++j) z += p[j] * x_[i * dim_ + j];
    return y_[i] * z;
  }

  static double softplus_neg(double m) {
    // log(1 + exp(-m)), stable for both signs
    return m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
  }

  double batch_loss_grad(std::span<const double> p, std::span<const std::size_t> batch,
                         std::span<double> grad) const override {
    const double inv = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (std::size_t i : batch) {
      const double m = margin(p, i);
      loss += softplus_neg(m);
      // d/dz log(1+exp(-y z)) = -y * sigmoid(-m)
      const double s = -y_[i] / (1.0 + std::exp(m));
      for (std::size_t j = 0; j < dim_; ++j) grad[j] += inv * s * x_[i * dim_ + j];
      grad[dim_] += inv * s;
    }
    return loss * inv;
  }

  double batch_loss(std::span<const double> p, std::span<const std::size_t> batch) const override {
    double loss = 0.0;
    for (std::size_t i : batch) loss += softplus_neg(margin(p, i));
    return loss / static_cast<double>(batch.size());
  }

  double objective(std::span<const double> p) const override {
    double loss = 0.0;
    for (std::size_t i = 0; i < n_train_; ++i) loss += softplus_neg(margin(p, i));
    return loss / static_cast<double>(n_train_);
  }

  double validation_metric(std::span<const double> p) const override {
    if (n_valid_ == 0) return 0.0;
    std::size_t correct = 0;
    for (std::size_t i = n_train_; i < n_train_ + n_valid_; ++i) correct += margin(p, i) > 0.0;
    return static_cast<double>(correct) / static_cast<double>(n_valid_);
  }
  bool metric_higher_is_better() const override { return true; }

 private:
  std::size_t dim_;
  std::size_t n_train_ = 0;
  std::size_t n_valid_ = 0;
  std::vector<double> x_;
  std::vector<double> y_;
  std::vector<double> init_;
};

// X = U V^T + noise, factorized as L R^T with per-entry squared error.
// The training objective is the summed loss over all observed entries.
class MatrixFact final : public Task {
 public:
  explicit MatrixFact(const TaskSpec& spec)
      : rows_(static_cast<std::size_t>(spec.rows)),
        cols_(static_cast<std::size_t>(spec.cols)),
        rank_(static_cast<std::size_t>(spec.rank)) {
    if (spec.rows < 1 || spec.cols < 1 || spec.rank < 1) throw Error(ErrorCode::kConfig, "bad MF shape");
    for (std::size_t i = 0; i < rows_; ++i) add_block("L/" + std::to_string(i), rank_);
    for (std::size_t j = 0; j < cols_; ++j) add_block("R/" + std::to_string(j), rank_);
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double factor_scale = std::pow(static_cast<double>(rank_), -0.25);
    std::vector<double> u(rows_ * rank_), v(cols_ * rank_);
    for (auto& a : u) a = factor_scale * gauss(rng);
    for (auto& a : v) a = factor_scale * gauss(rng);
    entries_.reserve(rows_ * cols_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) {
        double value = 0.0;
        for (std::size_t k = 0; k < rank_; ++k) value += u[i * rank_ + k] * v[j * rank_ + k];
        entries_.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j),
                            value + spec.noise * gauss(rng)});
      }
    init_.resize(param_count());
    for (auto& a : init_) a = 0.1 * gauss(rng);
  }

  TaskKind kind() const override { return TaskKind::kMatrixFact; }
  std::size_t train_size() const override { return entries_.size(); }
  std::size_t validation_size() const override { return 0; }
  std::vector<double> initial_params() const override { return init_; }

  bool touched_params(std::span<const std::size_t> batch, std::vector<std::size_t>& out) const override {
    for (std::size_t e : batch) {
      const auto& entry = entries_[e];
      for (std::size_t k = 0; k < rank_; ++k) {
        out.push_back(l_offset(entry.row) + k);
        out.push_back(r_offset(entry.col) + k);
      }
    }
    return true;
  }

  std::size_t l_offset(std::size_t i) const { return i * rank_; }
  std::size_t r_offset(std::size_t j) const { return (rows_ + j) * rank_; }

  double residual(std::span<const double> p, std::size_t e) const {
    const auto& entry = entries_[e];
    const double* l = &p[l_offset(entry.row)];
    const double* r = &p[r_offset(entry.col)];
    double pred = 0.0;
    for (std::size_t k = 0; k < rank_; ++k) pred += l[k] * r[k];
    return pred - entry.value;
  }

  double batch_loss_grad(std::span<const double> p, std::span<const std::size_t> batch,
                         std::span<double> grad) const override {
    const double inv = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (std::size_t e : batch) {
      const double err = residual(p, e);
      loss += 0.5 * err * err;
      const auto& entry = entries_[e];
      const std::size_t lo = l_offset(entry.row);
      const std::size_t ro = r_offset(entry.col);
      for (std::size_t k = 0; k < rank_; ++k) {
        grad[lo + k] += inv * err * p[ro + k];
        grad[ro + k] += inv * err * p[lo + k];
      }
    }
    return loss * inv;
  }

  double batch_loss(std::span<const double> p, std::span<const std::size_t> batch) const override {
    double loss = 0.0;
    for (std::size_t e : batch) {
      const double err = residual(p, e);
      loss += 0.5 * err * err;
    }
    return loss / static_cast<double>(batch.size());
  }

  double objective(std::span<const double> p) const override {
    double loss = 0.0;
    for (std::size_t e = 0; e < entries_.size(); ++e) {
      const double err = residual(p, e);
      loss += 0.5 * err * err;
    }
    return loss;
  }

  double validation_metric(std::span<const double> p) const override { return objective(p); }
  bool metric_higher_is_better() const override { return false; }

 private:
  struct Entry {
    std::uint32_t row;
    std::uint32_t col;
    double value;
  };
  std::size_t rows_;
  std::size_t cols_;
  std::size_t rank_;
  std::vector<Entry> entries_;
  std::vector<double> init_;
};

}  // namespace

std::shared_ptr<const Task> make_task(const TaskSpec& spec) {
  switch (spec.kind) {
    case TaskKind::kNoisyQuadratic: return std::make_shared<NoisyQuadratic>(spec);
    case TaskKind::kLogisticBlobs: return std::make_shared<LogisticBlobs>(spec);
    case TaskKind::kMatrixFact: return std::make_shared<MatrixFact>(spec);
  }
  throw Error(ErrorCode::kConfig, "unknown task kind");
}

}  // namespace branchtune::sim
