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
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "branchtune/sim/task.hpp"
#include "branchtune/types.hpp"

namespace branchtune::sim {

/// Parameter values versioned by branch. Each branch keeps its current
/// values plus the last `history_depth` committed versions so that stale
/// readers can be served. Storage for freed branches goes back to a pool and
/// is reused by the next fork.
class BranchedParamStore {
 public:
  BranchedParamStore(std::vector<ParamBlock> layout, std::size_t history_depth);

  void create(BranchId branch, std::span<const double> values);
  /// Deep copy of every version held by `parent`.
  void fork(BranchId child, BranchId parent);
  void free(BranchId branch);
  bool contains(BranchId branch) const { return index_.count(branch) != 0; }

  std::span<double> current(BranchId branch);
  std::span<const double> current(BranchId branch) const;
  /// Values as they were `lag` versions ago. lag is clamped to what exists.
  std::span<const double> version(BranchId branch, std::size_t lag) const;
  /// Keyed view of the current values, e.g. "w" or "L/3".
  std::span<const double> get(BranchId branch, std::string_view key) const;

  /// Opens a new version initialized from the current values. The previous
  /// values stay readable at lag 1, and so on up to history_depth.
  void advance(BranchId branch);
  /// Number of versions opened since the root was created (inherited by forks).
  std::int64_t version_count(BranchId branch) const;
  /// Oldest lag that can currently be served.
  std::size_t available_lag(BranchId branch) const;

  std::size_t live() const { return index_.size(); }
  /// Distinct slot allocations ever made; bounded by the peak live count.
  std::size_t allocations() const { return slots_.size(); }
  std::size_t pooled() const { return free_slots_.size(); }
  std::size_t param_count() const { return param_count_; }
  std::size_t history_depth() const { return depth_; }

 private:
  struct Slot {
    std::vector<std::vector<double>> ring;  // depth + 1 entries
    std::size_t head = 0;
    std::int64_t commits = 0;
  };

  Slot& slot(BranchId branch);
  const Slot& slot(BranchId branch) const;
  std::size_t acquire();

  std::vector<ParamBlock> layout_;
  std::size_t param_count_ = 0;
  std::size_t depth_;
  std::vector<std::unique_ptr<Slot>> slots_;
  std::vector<std::size_t> free_slots_;
  std::unordered_map<BranchId, std::size_t> index_;
};

}  // namespace branchtune::sim
