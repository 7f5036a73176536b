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

// Tuner <-> trainer message stream.
//
// Wire grammar, one record per line:
//
//   MSGTYPE clock=<int> [branch=<int>] [parent=<int>] [type=TRAINING|TESTING]
//           [tunables=<name>:<decimal>(,<name>:<decimal>)*] [progress=<decimal>]\n
//
// MSGTYPE is one of FORK, FREE, SCHEDULE, REPORT. Fields appear in the order
// above and are separated by single spaces. Decimals use the shortest form
// that parses back to the identical double ("inf", "-inf", "nan" for
// non-finite values).

#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "branchtune/types.hpp"

namespace branchtune::protocol {

struct ForkBranch {
  ClockValue clock;
  BranchId branch;
  BranchId parent;
  TunableSetting setting;
  BranchType type = BranchType::kTraining;
  bool operator==(const ForkBranch&) const = default;
};

struct FreeBranch {
  ClockValue clock;
  BranchId branch;
  bool operator==(const FreeBranch&) const = default;
};

struct ScheduleBranch {
  ClockValue clock;
  BranchId branch;
  bool operator==(const ScheduleBranch&) const = default;
};

struct ReportProgress {
  ClockValue clock;
  double progress = 0.0;
  // NaN-aware so that diverged reports still round-trip to an equal message.
  bool operator==(const ReportProgress& other) const;
};

using Message = std::variant<ForkBranch, FreeBranch, ScheduleBranch, ReportProgress>;

ClockValue clock_of(const Message& msg);
std::string_view tag_of(const Message& msg);
/// True for the three messages the tuner emits.
bool is_tuner_message(const Message& msg);

/// Newline-terminated record.
std::string encode_message(const Message& msg);

/// Parses one record (trailing newline optional). When `known_tunables` is
/// non-null, tunable names outside it are rejected. Throws Error with
/// ErrorCode::kMalformedRecord.
Message decode_message(std::string_view record,
                       const std::set<std::string>* known_tunables = nullptr);

enum class ViolationKind {
  kClockOrder,         // message clock went backwards
  kScheduleCount,      // clock in the scheduled range without exactly one schedule
  kUnknownBranch,      // schedule/free of an unknown or freed branch
  kUnknownParent,      // fork from an unknown or freed parent
  kReusedBranchId,     // fork of an id that already exists or existed
};

std::string_view to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  std::int64_t clock = 0;
  std::size_t index = 0;  // position in the stream
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;
  std::int64_t schedules = 0;
  bool ok() const { return violations.empty(); }
  std::size_t count(ViolationKind kind) const;
};

/// Checks a tuner-emitted stream. ReportProgress entries are skipped.
/// Branch 0 is live at the start of every stream.
ValidationReport validate_sequence(const std::vector<Message>& stream);

}  // namespace branchtune::protocol
