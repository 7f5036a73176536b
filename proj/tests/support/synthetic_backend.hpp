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

#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include "branchtune/transport.hpp"

namespace branchtune::testing {

/// What a synthetic branch carries: its run time and one free state value.
struct CurveState {
  double t = 0.0;
  double x = 0.0;
};

/// Trainer stand-in whose progress comes from a small closed-form model.
/// Every clock costs `per_clock` seconds and advances the branch's time
/// before the curve is evaluated; forks copy the parent's state so a child
/// continues where the parent was. TESTING branches report `metric`, or the
/// curve without advancing when no metric is given.
class SyntheticBackend final : public TrainerEndpoint, public TimeSource {
 public:
  using Curve = std::function<double(const TunableSetting&, CurveState&, std::mt19937_64&)>;
  using Metric = std::function<double(const TunableSetting&, const CurveState&)>;

  SyntheticBackend(Curve curve, double per_clock, std::uint64_t seed, Metric metric = {}, CurveState root = {})
      : curve_(std::move(curve)), metric_(std::move(metric)), per_clock_(per_clock), seed_(seed) {
    branches_[0] = Branch{{}, root, std::mt19937_64(seed), BranchType::kTraining};
  }

  std::optional<protocol::ReportProgress> handle(const protocol::Message& msg) override {
    if (const auto* f = std::get_if<protocol::ForkBranch>(&msg)) {
      auto parent = branches_.find(f->parent.value);
      if (parent == branches_.end()) throw Error(ErrorCode::kUnknownParent, "unknown parent");
      if (!ids_.insert(f->branch.value).second) throw Error(ErrorCode::kDuplicateBranch, "reused id");
      Branch child = parent->second;
      for (const auto& [k, v] : f->setting) child.setting[k] = v;
      child.type = f->type;
      child.rng.seed(seed_ * 1000003u + static_cast<std::uint64_t>(f->branch.value));
      branches_[f->branch.value] = std::move(child);
      return std::nullopt;
    }
    if (const auto* f = std::get_if<protocol::FreeBranch>(&msg)) {
      if (!branches_.erase(f->branch.value)) throw Error(ErrorCode::kUnknownBranch, "unknown branch");
      return std::nullopt;
    }
    if (const auto* s = std::get_if<protocol::ScheduleBranch>(&msg)) {
      auto it = branches_.find(s->branch.value);
      if (it == branches_.end()) throw Error(ErrorCode::kUnknownBranch, "unknown branch");
      Branch& b = it->second;
      now_ += per_clock_;
      ++schedules_;
      if (b.type == BranchType::kTesting) {
        CurveState copy = b.state;
        const double m = metric_ ? metric_(b.setting, b.state) : curve_(b.setting, copy, b.rng);
        return protocol::ReportProgress{s->clock, m};
      }
      b.state.t += per_clock_;
      return protocol::ReportProgress{s->clock, curve_(b.setting, b.state, b.rng)};
    }
    return std::nullopt;
  }

  double now() const override { return now_; }
  std::size_t live() const { return branches_.size(); }
  const CurveState& state(BranchId branch) const { return branches_.at(branch.value).state; }
  std::int64_t schedules() const { return schedules_; }

 private:
  struct Branch {
    TunableSetting setting;
    CurveState state;
    std::mt19937_64 rng;
    BranchType type = BranchType::kTraining;
  };
  Curve curve_;
  Metric metric_;
  double per_clock_;
  std::uint64_t seed_;
  double now_ = 0.0;
  std::int64_t schedules_ = 0;
  std::map<std::int64_t, Branch> branches_;
  std::set<std::int64_t> ids_;
};

/// Falling line under a sinusoid of period `period` and Gaussian noise.
/// Downsampling into windows of width `period` cancels the sinusoid, so the
/// summarizer needs a trace of at least k * period seconds before the trend
/// shows through.
struct TrendWithRipple {
  double start = 100.0;
  double slope = 1.0;
  double amplitude = 2.0;
  double period = 0.8;
  double sigma = 0.3;

  double operator()(const TunableSetting&, CurveState& s, std::mt19937_64& rng) const {
    std::normal_distribution<double> gauss(0.0, sigma);
    const double t = s.t;
    return start - slope * t + amplitude * std::sin(2.0 * std::numbers::pi * t / period) + gauss(rng);
  }
};

}  // namespace branchtune::testing
