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

// Command-line front end. Talks to the library only through the C API.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "branchtune/branchtune.h"

namespace {

int report_failure(bt_status status, const char* what) {
  std::cerr << "branchtune: " << what << ": " << bt_status_name(status);
  if (*bt_last_error()) std::cerr << ": " << bt_last_error();
  std::cerr << '\n';
  return static_cast<int>(status) == 0 ? 1 : 2;
}

// Splits leftover "--a.b=v" / "--a.b v" tokens into overrides. Unknown keys
// are left for the config parser to reject.
bool collect_overrides(const std::vector<std::string>& extras, std::vector<std::pair<std::string, std::string>>& out,
                       std::string& error) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& token = extras[i];
    if (token.rfind("--", 0) != 0 || token.size() == 2) {
      error = "unexpected argument '" + token + "'";
      return false;
    }
    std::string key = token.substr(2);
    std::string value;
    if (auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.resize(eq);
    } else if (i + 1 < extras.size()) {
      value = extras[++i];
    } else {
      error = "override '" + key + "' needs a value";
      return false;
    }
    out.emplace_back(std::move(key), std::move(value));
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Automatic tuning of training settings with branched trials"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(bt_version()));

  auto* run = app.add_subcommand("run", "Run one tuning session");
  std::string config_path, mode, out_dir;
  long long seed = -1;
  std::optional<bool> deterministic;
  run->add_option("--config", config_path, "Session config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--mode", mode, "Tuner mode")->check(CLI::IsMember({"mltuner", "fullrun", "halving", "fixed"}));
  run->add_option("--seed", seed, "Session seed")->check(CLI::NonNegativeNumber);
  run->add_option("--out", out_dir, "Output directory");
  run->add_flag("--deterministic,!--free-order", deterministic,
                "Fixed reduction order (or --free-order for randomized order)");
  run->allow_extras();
  run->footer("Any config field can be overridden by its dotted name, e.g. --task.seed 3 or --tuner.max_epochs=50.");

  auto* report = app.add_subcommand("report", "Compare finished runs");
  std::vector<std::string> inputs;
  std::string report_out;
  report->add_option("--inputs", inputs, "Run directories")->required()->check(CLI::ExistingDirectory);
  report->add_option("--out", report_out, "CSV path")->required();

  auto* validate = app.add_subcommand("validate", "Check the protocol messages in a session log");
  std::string log_path;
  validate->add_option("--log", log_path, "messages.jsonl")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  if (*run) {
    std::vector<std::pair<std::string, std::string>> overrides;
    std::string error;
    if (!collect_overrides(run->remaining(), overrides, error)) {
      std::cerr << "branchtune: " << error << '\n';
      return 1;
    }
    if (!mode.empty()) overrides.emplace_back("tuner.mode", mode);
    if (seed >= 0) overrides.emplace_back("seed", std::to_string(seed));
    if (deterministic) overrides.emplace_back("deterministic", *deterministic ? "true" : "false");

    bt_session* session = nullptr;
    bt_status st = bt_session_create(config_path.c_str(), &session);
    if (st != BT_OK) return report_failure(st, "config");
    for (const auto& [key, value] : overrides) {
      st = bt_session_set(session, key.c_str(), value.c_str());
      if (st != BT_OK) {
        bt_session_destroy(session);
        return report_failure(st, key.c_str());
      }
    }
    bt_result* result = nullptr;
    st = bt_session_run(session, out_dir.empty() ? nullptr : out_dir.c_str(), &result);
    bt_session_destroy(session);
    if (st != BT_OK) return report_failure(st, "run");
    char* json = nullptr;
    st = bt_result_get_json(result, &json);
    bt_result_destroy(result);
    if (st != BT_OK) return report_failure(st, "result");
    std::cout << json;
    bt_string_free(json);
    return 0;
  }

  if (*report) {
    std::vector<const char*> dirs;
    for (const auto& d : inputs) dirs.push_back(d.c_str());
    char* table = nullptr;
    bt_status st = bt_report(dirs.data(), dirs.size(), report_out.c_str(), &table);
    if (st != BT_OK) return report_failure(st, "report");
    std::cout << table;
    bt_string_free(table);
    return 0;
  }

  std::ifstream in(log_path, std::ios::binary);
  std::ostringstream text;
  text << in.rdbuf();
  std::size_t violations = 0;
  char* details = nullptr;
  bt_status st = bt_validate_log(text.str().c_str(), &violations, &details);
  if (st != BT_OK) return report_failure(st, "validate");
  std::cout << details << violations << " violation(s)\n";
  bt_string_free(details);
  return violations == 0 ? 0 : 3;
}
