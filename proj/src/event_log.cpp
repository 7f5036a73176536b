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

#include "branchtune/event_log.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace branchtune {

namespace {

nlohmann::json to_json(const FieldValue& value) {
  return std::visit(
      [](const auto& v) -> nlohmann::json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, double>) {
          // JSON has no inf/nan; keep them readable as strings.
          if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
        }
        return v;
      },
      value);
}

}  // namespace

void EventLog::append(std::string line) {
  if (mirror_) *mirror_ << line << '\n';
  lines_.push_back(std::move(line));
}

void EventLog::message(const protocol::Message& msg, bool outbound) {
  std::string record = protocol::encode_message(msg);
  record.pop_back();
  nlohmann::ordered_json j;
  j["event"] = "message";
  j["dir"] = outbound ? "out" : "in";
  j["record"] = record;
  append(j.dump());
}

void EventLog::event(std::string_view name, std::vector<Field> fields) {
  nlohmann::ordered_json j;
  j["event"] = name;
  for (auto& [key, value] : fields) j[key] = to_json(value);
  append(j.dump());
}

std::vector<protocol::Message> EventLog::messages() const {
  std::vector<protocol::Message> out;
  for (const auto& line : lines_) {
    auto j = nlohmann::json::parse(line);
    if (j.value("event", "") == "message") out.push_back(protocol::decode_message(j["record"].get<std::string>()));
  }
  return out;
}

std::string EventLog::text() const {
  std::string out;
  for (const auto& line : lines_) {
    out += line;
    out += '\n';
  }
  return out;
}

std::vector<protocol::Message> messages_from_log(std::string_view jsonl) {
  std::vector<protocol::Message> out;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::kMalformedRecord, "log line is not JSON");
    if (j.value("event", "") == "message") out.push_back(protocol::decode_message(j["record"].get<std::string>()));
  }
  return out;
}

}  // namespace branchtune
