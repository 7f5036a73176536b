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

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <string>

#include "branchtune/branchtune.h"
#include "doctest.h"

namespace fs = std::filesystem;

namespace {

std::string config_path(const char* name) {
  const char* dir = std::getenv("BRANCHTUNE_CONFIG_DIR");
  return std::string(dir ? dir : "configs") + "/" + name;
}

std::string take(char* text) {
  std::string out = text ? text : "";
  bt_string_free(text);
  return out;
}

}  // namespace

TEST_CASE("summarize through the C API") {
  double t[10], x[10];
  for (int i = 0; i < 10; ++i) t[i] = i, x[i] = 10 - i;
  bt_summary s{};
  REQUIRE(bt_summarize(t, x, 10, 0, 0.0, &s) == BT_OK);
  CHECK(s.speed == 1.0);
  CHECK(s.label == BT_LABEL_CONVERGING);
  x[4] = 8;
  REQUIRE(bt_summarize(t, x, 10, 10, 0.0, &s) == BT_OK);
  CHECK(s.label == BT_LABEL_UNSTABLE);
  CHECK(bt_summarize(nullptr, x, 10, 10, 0.0, &s) == BT_INVALID_ARGUMENT);
  CHECK(std::strlen(bt_last_error()) > 0);
}

TEST_CASE("session lifecycle") {
  bt_session* session = nullptr;
  REQUIRE(bt_session_create(config_path("quadratic_fixed.json").c_str(), &session) == BT_OK);
  REQUIRE(session);
  CHECK(bt_session_set(session, "tuner.max_epochs", "50") == BT_OK);
  CHECK(bt_session_set(session, "tuner.nope", "1") == BT_CONFIG);

  const fs::path out = fs::temp_directory_path() / "branchtune_capi_test";
  fs::remove_all(out);
  bt_result* result = nullptr;
  REQUIRE(bt_session_run(session, out.string().c_str(), &result) == BT_OK);
  bt_result_summary sum{};
  REQUIRE(bt_result_get_summary(result, &sum) == BT_OK);
  CHECK(sum.reached_threshold == 1);
  CHECK(sum.retunes == 0);
  CHECK(sum.total_clocks > 0);

  char* text = nullptr;
  REQUIRE(bt_result_get_mode(result, &text) == BT_OK);
  CHECK(take(text) == "fixed");
  REQUIRE(bt_result_get_json(result, &text) == BT_OK);
  CHECK(take(text).find("\"total_clocks\"") != std::string::npos);
  REQUIRE(bt_result_get_log(result, &text) == BT_OK);
  const std::string log = take(text);
  size_t violations = 99;
  char* details = nullptr;
  REQUIRE(bt_validate_log(log.c_str(), &violations, &details) == BT_OK);
  CHECK(violations == 0);
  CHECK(take(details).empty());
  CHECK(fs::exists(out / "messages.jsonl"));

  const std::string dir = out.string();
  const char* dirs[] = {dir.c_str()};
  char* table = nullptr;
  REQUIRE(bt_report(dirs, 1, (out / "report.csv").string().c_str(), &table) == BT_OK);
  CHECK(take(table).find("fixed") != std::string::npos);

  bt_result_destroy(result);
  bt_session_destroy(session);
  fs::remove_all(out);
}

TEST_CASE("errors map to status codes") {
  bt_session* session = nullptr;
  CHECK(bt_session_create("/nonexistent/config.json", &session) == BT_IO);
  CHECK(session == nullptr);
  CHECK(bt_session_create_from_json("{", &session) == BT_CONFIG);
  CHECK(bt_session_create_from_json(nullptr, &session) == BT_INVALID_ARGUMENT);

  // Cross-field checks wait for run.
  REQUIRE(bt_session_create_from_json(R"({"search_space": [{"name": "lr", "kind": "log", "lo": 1e-3, "hi": 1}],
                                          "tuner": {"mode": "fixed"}})", &session) == BT_OK);
  bt_result* result = nullptr;
  CHECK(bt_session_run(session, nullptr, &result) == BT_CONFIG);
  CHECK(result == nullptr);
  bt_session_destroy(session);

  size_t violations = 0;
  const char* bad = R"({"event":"message","dir":"out","record":"SCHEDULE clock=0 branch=5"})";
  REQUIRE(bt_validate_log(bad, &violations, nullptr) == BT_OK);
  CHECK(violations == 1);
  CHECK(bt_validate_log(R"({"event":"message","dir":"out","record":"XYZZY"})", &violations, nullptr) ==
        BT_MALFORMED_RECORD);
  CHECK(std::string(bt_status_name(BT_TRIAL_TIME_CEILING)) == "trial time ceiling exceeded");
  CHECK(std::string(bt_version()).size() > 0);
}
