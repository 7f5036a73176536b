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

#include "branchtune/search_space.hpp"

#include <algorithm>
#include <cmath>

namespace branchtune {

std::string_view to_string(TunableKind kind) {
  switch (kind) {
    case TunableKind::kDiscrete: return "discrete";
    case TunableKind::kLinear: return "linear";
    case TunableKind::kLog: return "log";
  }
  return "?";
}

TunableSpec TunableSpec::discrete(std::string name, std::vector<double> values) {
  TunableSpec spec;
  spec.name = std::move(name);
  spec.kind = TunableKind::kDiscrete;
  spec.values = std::move(values);
  return spec;
}

TunableSpec TunableSpec::linear(std::string name, double lo, double hi) {
  TunableSpec spec;
  spec.name = std::move(name);
  spec.kind = TunableKind::kLinear;
  spec.lo = lo;
  spec.hi = hi;
  return spec;
}

TunableSpec TunableSpec::log(std::string name, double lo, double hi) {
  TunableSpec spec = linear(std::move(name), lo, hi);
  spec.kind = TunableKind::kLog;
  return spec;
}

bool TunableSpec::contains(double value) const {
  if (!std::isfinite(value)) return false;
  if (kind == TunableKind::kDiscrete)
    return std::find(values.begin(), values.end(), value) != values.end();
  return value >= lo && value <= hi;
}

void TunableSpec::validate() const {
  if (name.empty()) throw Error(ErrorCode::kConfig, "tunable without a name");
  if (kind == TunableKind::kDiscrete) {
    if (values.empty()) throw Error(ErrorCode::kConfig, "discrete tunable '" + name + "' has no values");
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw Error(ErrorCode::kConfig, "discrete tunable '" + name + "' has duplicate values");
    return;
  }
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
    throw Error(ErrorCode::kConfig, "tunable '" + name + "' needs lo < hi");
  if (kind == TunableKind::kLog && lo <= 0.0)
    throw Error(ErrorCode::kConfig, "log tunable '" + name + "' needs 0 < lo");
}

SearchSpace::SearchSpace(std::vector<TunableSpec> dims) : dims_(std::move(dims)) {
  std::set<std::string> seen;
  for (const auto& dim : dims_) {
    dim.validate();
    if (!seen.insert(dim.name).second)
      throw Error(ErrorCode::kConfig, "duplicate tunable name '" + dim.name + "'");
  }
}

std::set<std::string> SearchSpace::names() const {
  std::set<std::string> out;
  for (const auto& dim : dims_) out.insert(dim.name);
  return out;
}

const TunableSpec* SearchSpace::find(std::string_view name) const {
  for (const auto& dim : dims_)
    if (dim.name == name) return &dim;
  return nullptr;
}

bool SearchSpace::contains(const TunableSetting& setting) const {
  if (setting.size() != dims_.size()) return false;
  for (const auto& dim : dims_) {
    auto it = setting.find(dim.name);
    if (it == setting.end() || !dim.contains(it->second)) return false;
  }
  return true;
}

}  // namespace branchtune
