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

#include "branchtune/protocol.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <optional>
#include <unordered_map>

#include "format_util.hpp"

namespace branchtune {

std::string_view to_string(BranchType type) {
  return type == BranchType::kTesting ? "TESTING" : "TRAINING";
}

std::optional<BranchType> parse_branch_type(std::string_view text) {
  if (text == "TRAINING") return BranchType::kTraining;
  if (text == "TESTING") return BranchType::kTesting;
  return std::nullopt;
}

std::string format_setting(const TunableSetting& setting) {
  std::string out;
  for (const auto& [name, value] : setting) {
    if (!out.empty()) out += ',';
    out += name;
    out += ':';
    out += detail::format_double(value);
  }
  return out;
}

namespace protocol {

namespace {

[[noreturn]] void malformed(std::string_view record, const std::string& why) {
  std::string shown(record.substr(0, 120));
  while (!shown.empty() && (shown.back() == '\n' || shown.back() == '\r')) shown.pop_back();
  throw Error(ErrorCode::kMalformedRecord, "malformed record (" + why + "): '" + shown + "'");
}

std::optional<std::int64_t> parse_int(std::string_view text) {
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || value < 0) return std::nullopt;
  return value;
}

bool valid_name(std::string_view name) {
  if (name.empty()) return false;
  for (char c : name) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
              c == '_' || c == '.' || c == '-';
    if (!ok) return false;
  }
  return true;
}

}  // namespace

bool ReportProgress::operator==(const ReportProgress& other) const {
  if (clock != other.clock) return false;
  if (std::isnan(progress) || std::isnan(other.progress))
    return std::isnan(progress) && std::isnan(other.progress);
  return progress == other.progress;
}

ClockValue clock_of(const Message& msg) {
  return std::visit([](const auto& m) { return m.clock; }, msg);
}

std::string_view tag_of(const Message& msg) {
  struct Tag {
    std::string_view operator()(const ForkBranch&) const { return "FORK"; }
    std::string_view operator()(const FreeBranch&) const { return "FREE"; }
    std::string_view operator()(const ScheduleBranch&) const { return "SCHEDULE"; }
    std::string_view operator()(const ReportProgress&) const { return "REPORT"; }
  };
  return std::visit(Tag{}, msg);
}

bool is_tuner_message(const Message& msg) { return !std::holds_alternative<ReportProgress>(msg); }

std::string encode_message(const Message& msg) {
  std::string out(tag_of(msg));
  out += " clock=" + std::to_string(clock_of(msg).value);
  if (const auto* fork = std::get_if<ForkBranch>(&msg)) {
    out += " branch=" + std::to_string(fork->branch.value);
    out += " parent=" + std::to_string(fork->parent.value);
    out += " type=";
    out += to_string(fork->type);
    out += " tunables=" + format_setting(fork->setting);
  } else if (const auto* free = std::get_if<FreeBranch>(&msg)) {
    out += " branch=" + std::to_string(free->branch.value);
  } else if (const auto* sched = std::get_if<ScheduleBranch>(&msg)) {
    out += " branch=" + std::to_string(sched->branch.value);
  } else {
    out += " progress=" + detail::format_double(std::get<ReportProgress>(msg).progress);
  }
  out += '\n';
  return out;
}

Message decode_message(std::string_view record, const std::set<std::string>* known_tunables) {
  std::string_view body = record;
  if (!body.empty() && body.back() == '\n') body.remove_suffix(1);
  if (!body.empty() && body.back() == '\r') body.remove_suffix(1);
  if (body.find('\n') != std::string_view::npos) malformed(record, "embedded newline");

  std::vector<std::string_view> tokens;
  std::size_t pos = 0;
  while (pos <= body.size()) {
    std::size_t next = body.find(' ', pos);
    if (next == std::string_view::npos) next = body.size();
    if (next == pos) malformed(record, "empty token");
    tokens.push_back(body.substr(pos, next - pos));
    pos = next + 1;
  }
  if (tokens.empty()) malformed(record, "empty record");

  const std::string_view tag = tokens.front();
  static const std::map<std::string_view, std::vector<std::string_view>> kFields = {
      {"FORK", {"clock", "branch", "parent", "type", "tunables"}},
      {"FREE", {"clock", "branch"}},
      {"SCHEDULE", {"clock", "branch"}},
      {"REPORT", {"clock", "progress"}},
  };
  auto spec = kFields.find(tag);
  if (spec == kFields.end()) malformed(record, "unknown variant tag");
  const auto& names = spec->second;
  if (tokens.size() - 1 != names.size()) malformed(record, "wrong field count");

  std::unordered_map<std::string_view, std::string_view> fields;
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::string_view tok = tokens[i + 1];
    auto eq = tok.find('=');
    if (eq == std::string_view::npos || tok.substr(0, eq) != names[i])
      malformed(record, "expected field '" + std::string(names[i]) + "'");
    fields[names[i]] = tok.substr(eq + 1);
  }

  auto int_field = [&](std::string_view name) {
    auto value = parse_int(fields.at(name));
    if (!value) malformed(record, "non-numeric " + std::string(name));
    return *value;
  };

  ClockValue clock{int_field("clock")};
  if (tag == "FREE") return FreeBranch{clock, BranchId{int_field("branch")}};
  if (tag == "SCHEDULE") return ScheduleBranch{clock, BranchId{int_field("branch")}};
  if (tag == "REPORT") {
    auto progress = detail::parse_double(fields.at("progress"));
    if (!progress) malformed(record, "non-numeric progress");
    return ReportProgress{clock, *progress};
  }

  ForkBranch fork;
  fork.clock = clock;
  fork.branch = BranchId{int_field("branch")};
  fork.parent = BranchId{int_field("parent")};
  auto type = parse_branch_type(fields.at("type"));
  if (!type) malformed(record, "bad branch type");
  fork.type = *type;
  std::string_view list = fields.at("tunables");
  while (!list.empty()) {
    auto comma = list.find(',');
    std::string_view item = list.substr(0, comma);
    auto colon = item.find(':');
    if (colon == std::string_view::npos) malformed(record, "tunable without value");
    std::string name(item.substr(0, colon));
    if (!valid_name(name)) malformed(record, "bad tunable name");
    if (known_tunables && !known_tunables->count(name))
      malformed(record, "unknown tunable '" + name + "'");
    auto value = detail::parse_double(item.substr(colon + 1));
    if (!value) malformed(record, "non-numeric tunable value");
    if (!fork.setting.emplace(std::move(name), *value).second)
      malformed(record, "duplicate tunable");
    if (comma == std::string_view::npos) break;
    list.remove_prefix(comma + 1);
    if (list.empty()) malformed(record, "trailing comma");
  }
  return fork;
}

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::kClockOrder: return "clock-order";
    case ViolationKind::kScheduleCount: return "schedule-count";
    case ViolationKind::kUnknownBranch: return "unknown-branch";
    case ViolationKind::kUnknownParent: return "unknown-parent";
    case ViolationKind::kReusedBranchId: return "reused-branch-id";
  }
  return "?";
}

std::size_t ValidationReport::count(ViolationKind kind) const {
  std::size_t n = 0;
  for (const auto& v : violations) n += v.kind == kind;
  return n;
}

ValidationReport validate_sequence(const std::vector<Message>& stream) {
  ValidationReport report;
  auto add = [&](ViolationKind kind, std::int64_t clock, std::size_t index, std::string detail) {
    report.violations.push_back({kind, clock, index, std::move(detail)});
  };

  std::set<std::int64_t> live = {kRootBranch.value};
  std::set<std::int64_t> seen = {kRootBranch.value};
  std::map<std::int64_t, int> schedules_per_clock;
  std::optional<std::int64_t> last_clock;

  for (std::size_t i = 0; i < stream.size(); ++i) {
    const Message& msg = stream[i];
    if (!is_tuner_message(msg)) continue;
    const std::int64_t clock = clock_of(msg).value;
    if (last_clock && clock < *last_clock)
      add(ViolationKind::kClockOrder, clock, i,
          "clock " + std::to_string(clock) + " after " + std::to_string(*last_clock));
    last_clock = last_clock ? std::max(*last_clock, clock) : clock;

    if (const auto* fork = std::get_if<ForkBranch>(&msg)) {
      if (!live.count(fork->parent.value))
        add(ViolationKind::kUnknownParent, clock, i,
            "fork of branch " + std::to_string(fork->branch.value) + " from unknown or freed parent " +
                std::to_string(fork->parent.value));
      if (seen.count(fork->branch.value)) {
        add(ViolationKind::kReusedBranchId, clock, i,
            "branch id " + std::to_string(fork->branch.value) + " reused");
      } else {
        seen.insert(fork->branch.value);
        live.insert(fork->branch.value);
      }
    } else if (const auto* free = std::get_if<FreeBranch>(&msg)) {
      if (!live.erase(free->branch.value))
        add(ViolationKind::kUnknownBranch, clock, i,
            "free of unknown or freed branch " + std::to_string(free->branch.value));
    } else if (const auto* sched = std::get_if<ScheduleBranch>(&msg)) {
      ++report.schedules;
      ++schedules_per_clock[clock];
      if (!live.count(sched->branch.value))
        add(ViolationKind::kUnknownBranch, clock, i,
            "schedule of unknown or freed branch " + std::to_string(sched->branch.value));
    }
  }

  if (!schedules_per_clock.empty()) {
    const std::int64_t first = schedules_per_clock.begin()->first;
    const std::int64_t last = schedules_per_clock.rbegin()->first;
    for (std::int64_t c = first; c <= last; ++c) {
      auto it = schedules_per_clock.find(c);
      int n = it == schedules_per_clock.end() ? 0 : it->second;
      if (n != 1)
        add(ViolationKind::kScheduleCount, c, 0,
            std::to_string(n) + " schedules at clock " + std::to_string(c));
    }
  }
  return report;
}

}  // namespace protocol
}  // namespace branchtune
