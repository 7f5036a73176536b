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
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "branchtune/protocol.hpp"

namespace branchtune {

using FieldValue = std::variant<std::int64_t, double, std::string, bool>;
using Field = std::pair<std::string, FieldValue>;

/// JSON-lines session log: one line per protocol message plus summarizer
/// outputs and tuning decisions. Lines are kept in memory and optionally
/// mirrored to a stream.
///
///   {"event":"message","dir":"out","record":"FORK clock=0 ..."}
///   {"event":"summary","branch":3,"speed":0.5,...}
class EventLog {
 public:
  explicit EventLog(std::ostream* mirror = nullptr) : mirror_(mirror) {}

  void message(const protocol::Message& msg, bool outbound);
  void event(std::string_view name, std::vector<Field> fields);

  const std::vector<std::string>& lines() const { return lines_; }
  /// Protocol messages in log order, both directions.
  std::vector<protocol::Message> messages() const;
  std::string text() const;

 private:
  void append(std::string line);

  std::ostream* mirror_;
  std::vector<std::string> lines_;
};

/// Parses messages out of JSON-lines log text.
std::vector<protocol::Message> messages_from_log(std::string_view jsonl);

}  // namespace branchtune
