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

#include "branchtune/sim/param_store.hpp"

#include <algorithm>
#include <string>

namespace branchtune::sim {

BranchedParamStore::BranchedParamStore(std::vector<ParamBlock> layout, std::size_t history_depth)
    : layout_(std::move(layout)), depth_(history_depth) {
  for (const auto& block : layout_) param_count_ = std::max(param_count_, block.offset + block.size);
}

std::size_t BranchedParamStore::acquire() {
  if (!free_slots_.empty()) {
    std::size_t s = free_slots_.back();
    free_slots_.pop_back();
    return s;
  }
  auto fresh = std::make_unique<Slot>();
  fresh->ring.assign(depth_ + 1, std::vector<double>(param_count_, 0.0));
  slots_.push_back(std::move(fresh));
  return slots_.size() - 1;
}

BranchedParamStore::Slot& BranchedParamStore::slot(BranchId branch) {
  auto it = index_.find(branch);
  if (it == index_.end())
    throw Error(ErrorCode::kUnknownBranch, "no parameters for branch " + std::to_string(branch.value));
  return *slots_[it->second];
}

const BranchedParamStore::Slot& BranchedParamStore::slot(BranchId branch) const {
  auto it = index_.find(branch);
  if (it == index_.end())
    throw Error(ErrorCode::kUnknownBranch, "no parameters for branch " + std::to_string(branch.value));
  return *slots_[it->second];
}

void BranchedParamStore::create(BranchId branch, std::span<const double> values) {
  if (contains(branch))
    throw Error(ErrorCode::kDuplicateBranch, "branch " + std::to_string(branch.value) + " exists");
  if (values.size() != param_count_) throw Error(ErrorCode::kInvalidArgument, "parameter size mismatch");
  const std::size_t s = acquire();
  Slot& target = *slots_[s];
  for (auto& version : target.ring) std::copy(values.begin(), values.end(), version.begin());
  target.head = 0;
  target.commits = 0;
  index_[branch] = s;
}

void BranchedParamStore::fork(BranchId child, BranchId parent) {
  if (contains(child))
    throw Error(ErrorCode::kDuplicateBranch, "branch " + std::to_string(child.value) + " exists");
  const std::size_t parent_slot = index_.at(parent);
  const std::size_t s = acquire();
  const Slot& from = *slots_[parent_slot];
  Slot& to = *slots_[s];
  for (std::size_t i = 0; i < from.ring.size(); ++i)
    std::copy(from.ring[i].begin(), from.ring[i].end(), to.ring[i].begin());
  to.head = from.head;
  to.commits = from.commits;
  index_[child] = s;
}

void BranchedParamStore::free(BranchId branch) {
  auto it = index_.find(branch);
  if (it == index_.end())
    throw Error(ErrorCode::kUnknownBranch, "free of unknown branch " + std::to_string(branch.value));
  free_slots_.push_back(it->second);
  index_.erase(it);
}

std::span<double> BranchedParamStore::current(BranchId branch) {
  Slot& s = slot(branch);
  return s.ring[s.head];
}

std::span<const double> BranchedParamStore::current(BranchId branch) const {
  const Slot& s = slot(branch);
  return s.ring[s.head];
}

std::size_t BranchedParamStore::available_lag(BranchId branch) const {
  const Slot& s = slot(branch);
  return static_cast<std::size_t>(std::min<std::int64_t>(s.commits, static_cast<std::int64_t>(depth_)));
}

std::span<const double> BranchedParamStore::version(BranchId branch, std::size_t lag) const {
  const Slot& s = slot(branch);
  lag = std::min(lag, available_lag(branch));
  const std::size_t n = s.ring.size();
  return s.ring[(s.head + n - lag) % n];
}

std::span<const double> BranchedParamStore::get(BranchId branch, std::string_view key) const {
  for (const auto& block : layout_)
    if (block.key == key) return current(branch).subspan(block.offset, block.size);
  throw Error(ErrorCode::kInvalidArgument, "unknown parameter key '" + std::string(key) + "'");
}

void BranchedParamStore::advance(BranchId branch) {
  Slot& s = slot(branch);
  const std::size_t next = (s.head + 1) % s.ring.size();
  if (next != s.head) std::copy(s.ring[s.head].begin(), s.ring[s.head].end(), s.ring[next].begin());
  s.head = next;
  ++s.commits;
}

std::int64_t BranchedParamStore::version_count(BranchId branch) const { return slot(branch).commits; }

}  // namespace branchtune::sim
