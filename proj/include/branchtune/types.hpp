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

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace branchtune {

/// Global logical time. One clock is one ScheduleBranch.
struct ClockValue {
  std::int64_t value = 0;
  auto operator<=>(const ClockValue&) const = default;
};

/// Branch identity. Branch 0 is the implicit root training state.
struct BranchId {
  std::int64_t value = 0;
  auto operator<=>(const BranchId&) const = default;
};

inline constexpr BranchId kRootBranch{0};

enum class BranchType { kTraining, kTesting };

std::string_view to_string(BranchType type);
std::optional<BranchType> parse_branch_type(std::string_view text);

/// A concrete assignment of tunable values, keyed by dimension name.
using TunableSetting = std::map<std::string, double>;

std::string format_setting(const TunableSetting& setting);

enum class ErrorCode {
  kInvalidArgument = 1,
  kConfig,
  kMalformedRecord,
  kTrialTimeCeilingExceeded,
  kNoConvergingSetting,
  kUnknownParent,
  kDuplicateBranch,
  kUnknownBranch,
  kWrongBranchType,
  kIo,
};

/// Base for every error thrown by the library. The code survives the C API.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace branchtune

template <>
struct std::hash<branchtune::BranchId> {
  std::size_t operator()(const branchtune::BranchId& id) const noexcept {
    return std::hash<std::int64_t>{}(id.value);
  }
};
