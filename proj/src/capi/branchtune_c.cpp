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

#include "branchtune/branchtune.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "branchtune/event_log.hpp"
#include "branchtune/protocol.hpp"
#include "branchtune/session/config.hpp"
#include "branchtune/session/report.hpp"
#include "branchtune/session/runner.hpp"
#include "branchtune/summarizer.hpp"

struct bt_session {
  std::string config_text;
  std::vector<branchtune::session::Override> overrides;
};

struct bt_result {
  branchtune::session::SessionResult result;
};

namespace {

thread_local std::string g_last_error;

bt_status status_of(branchtune::ErrorCode code) {
  using branchtune::ErrorCode;
  switch (code) {
    case ErrorCode::kInvalidArgument: return BT_INVALID_ARGUMENT;
    case ErrorCode::kConfig: return BT_CONFIG;
    case ErrorCode::kMalformedRecord: return BT_MALFORMED_RECORD;
    case ErrorCode::kTrialTimeCeilingExceeded: return BT_TRIAL_TIME_CEILING;
    case ErrorCode::kNoConvergingSetting: return BT_NO_CONVERGING_SETTING;
    case ErrorCode::kUnknownParent: return BT_UNKNOWN_PARENT;
    case ErrorCode::kDuplicateBranch: return BT_DUPLICATE_BRANCH;
    case ErrorCode::kUnknownBranch: return BT_UNKNOWN_BRANCH;
    case ErrorCode::kWrongBranchType: return BT_WRONG_BRANCH_TYPE;
    case ErrorCode::kIo: return BT_IO;
  }
  return BT_INTERNAL;
}

bt_status fail(bt_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

// Runs `body`, translating exceptions into status codes.
template <typename F>
bt_status guarded(F&& body) {
  try {
    g_last_error.clear();
    return body();
  } catch (const branchtune::Error& e) {
    return fail(status_of(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(BT_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(BT_INTERNAL, e.what());
  }
}

char* copy_string(const std::string& text) {
  char* out = static_cast<char*>(std::malloc(text.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, text.c_str(), text.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* bt_version(void) { return "0.1.0"; }

const char* bt_last_error(void) { return g_last_error.c_str(); }

const char* bt_status_name(bt_status status) {
  switch (status) {
    case BT_OK: return "ok";
    case BT_INVALID_ARGUMENT: return "invalid argument";
    case BT_CONFIG: return "config error";
    case BT_MALFORMED_RECORD: return "malformed record";
    case BT_TRIAL_TIME_CEILING: return "trial time ceiling exceeded";
    case BT_NO_CONVERGING_SETTING: return "no converging setting";
    case BT_UNKNOWN_PARENT: return "unknown parent";
    case BT_DUPLICATE_BRANCH: return "duplicate branch";
    case BT_UNKNOWN_BRANCH: return "unknown branch";
    case BT_WRONG_BRANCH_TYPE: return "wrong branch type";
    case BT_IO: return "i/o error";
    case BT_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void bt_string_free(char* text) { std::free(text); }

bt_status bt_summarize(const double* t, const double* x, size_t n, int k, double epsilon, bt_summary* out) {
  if (!out || (n > 0 && (!t || !x))) return fail(BT_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    branchtune::ProgressTrace trace(n);
    for (size_t i = 0; i < n; ++i) trace[i] = {t[i], x[i]};
    branchtune::SummarizerConfig cfg;
    if (k > 0) cfg.k = k;
    cfg.epsilon = epsilon;
    const auto s = branchtune::summarize(trace, cfg);
    out->speed = s.speed;
    out->noise = s.noise;
    out->range_x = s.range_x;
    out->range_t = s.range_t;
    out->label = s.label == branchtune::Label::kConverging ? BT_LABEL_CONVERGING
                 : s.label == branchtune::Label::kDiverged ? BT_LABEL_DIVERGED
                                                           : BT_LABEL_UNSTABLE;
    return BT_OK;
  });
}

bt_status bt_session_create_from_json(const char* json_text, bt_session** out) {
  if (!json_text || !out) return fail(BT_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    branchtune::session::parse_config(json_text, {}, false);
    *out = new bt_session{json_text, {}};
    return BT_OK;
  });
}

bt_status bt_session_create(const char* config_path, bt_session** out) {
  if (!config_path || !out) return fail(BT_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  std::ifstream in(config_path);
  if (!in) return fail(BT_IO, std::string("cannot open config '") + config_path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return bt_session_create_from_json(text.str().c_str(), out);
}

bt_status bt_session_set(bt_session* session, const char* key, const char* value) {
  if (!session || !key || !value) return fail(BT_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    auto overrides = session->overrides;
    overrides.emplace_back(key, value);
    branchtune::session::parse_config(session->config_text, overrides, false);
    session->overrides = std::move(overrides);
    return BT_OK;
  });
}

void bt_session_destroy(bt_session* session) { delete session; }

bt_status bt_session_run(bt_session* session, const char* out_dir, bt_result** out) {
  if (!session || !out) return fail(BT_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto config = branchtune::session::parse_config(session->config_text, session->overrides);
    config.output_dir = out_dir ? out_dir : "";
    auto result = std::make_unique<bt_result>();
    result->result = branchtune::session::run_session(config);
    *out = result.release();
    return BT_OK;
  });
}

bt_status bt_result_get_summary(const bt_result* result, bt_result_summary* out) {
  if (!result || !out) return fail(BT_INVALID_ARGUMENT, "null argument");
  const auto& r = result->result;
  out->final_metric = r.final_metric;
  out->total_clocks = r.total_clocks;
  out->wall_seconds = r.wall_seconds;
  out->overhead_fraction = r.overhead_fraction;
  out->retunes = r.retunes;
  out->tuning_clocks = r.tuning_clocks;
  out->reached_threshold = r.reached_threshold ? 1 : 0;
  return BT_OK;
}

bt_status bt_result_get_mode(const bt_result* result, char** out) {
  if (!result || !out) return fail(BT_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    *out = copy_string(result->result.mode);
    return BT_OK;
  });
}

bt_status bt_result_get_json(const bt_result* result, char** out) {
  if (!result || !out) return fail(BT_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    *out = copy_string(branchtune::session::result_json(result->result));
    return BT_OK;
  });
}

bt_status bt_result_get_log(const bt_result* result, char** out) {
  if (!result || !out) return fail(BT_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    *out = copy_string(result->result.log_text);
    return BT_OK;
  });
}

void bt_result_destroy(bt_result* result) { delete result; }

bt_status bt_validate_log(const char* jsonl, size_t* violations, char** details) {
  if (!jsonl || !violations) return fail(BT_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    const auto report = branchtune::protocol::validate_sequence(branchtune::messages_from_log(jsonl));
    *violations = report.violations.size();
    if (details) {
      std::string text;
      for (const auto& v : report.violations)
        text += std::string(branchtune::protocol::to_string(v.kind)) + " clock=" + std::to_string(v.clock) + " " +
                v.detail + "\n";
      *details = copy_string(text);
    }
    return BT_OK;
  });
}

bt_status bt_report(const char* const* dirs, size_t n, const char* out_csv, char** table) {
  if ((n > 0 && !dirs) || !out_csv) return fail(BT_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    std::vector<std::string> paths;
    for (size_t i = 0; i < n; ++i) {
      if (!dirs[i]) return fail(BT_INVALID_ARGUMENT, "null directory");
      paths.emplace_back(dirs[i]);
    }
    const std::string text = branchtune::session::write_report(paths, out_csv);
    if (table) *table = copy_string(text);
    return BT_OK;
  });
}

}  // extern "C"
