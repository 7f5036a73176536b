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

#include <set>
#include <string>
#include <vector>

#include "branchtune/types.hpp"

namespace branchtune {

enum class TunableKind { kDiscrete, kLinear, kLog };

std::string_view to_string(TunableKind kind);

/// One search dimension: a finite value set, or a continuous range sampled
/// in linear or log10 scale.
struct TunableSpec {
  std::string name;
  TunableKind kind = TunableKind::kLinear;
  std::vector<double> values;  // kDiscrete
  double lo = 0.0;             // kLinear / kLog
  double hi = 1.0;

  static TunableSpec discrete(std::string name, std::vector<double> values);
  static TunableSpec linear(std::string name, double lo, double hi);
  static TunableSpec log(std::string name, double lo, double hi);

  bool contains(double value) const;
  /// Throws Error(kConfig) when the spec breaks its invariants.
  void validate() const;
};

class SearchSpace {
 public:
  SearchSpace() = default;
  explicit SearchSpace(std::vector<TunableSpec> dims);

  const std::vector<TunableSpec>& dims() const { return dims_; }
  std::size_t size() const { return dims_.size(); }
  std::set<std::string> names() const;
  const TunableSpec* find(std::string_view name) const;

  /// Every dimension assigned, no extras, each value inside its spec.
  bool contains(const TunableSetting& setting) const;

 private:
  std::vector<TunableSpec> dims_;
};

}  // namespace branchtune
