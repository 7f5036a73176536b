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

#ifndef BRANCHTUNE_BRANCHTUNE_H_
#define BRANCHTUNE_BRANCHTUNE_H_

/* C interface to the tuner. All functions return a status code; on failure
 * bt_last_error() describes the problem (thread-local, valid until the next
 * call on the same thread). Strings returned through char** are owned by the
 * caller and released with bt_string_free. */

#include <stddef.h>
#include <stdint.h>

#include "branchtune/export.h"

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bt_status {
  BT_OK = 0,
  BT_INVALID_ARGUMENT = 1,
  BT_CONFIG = 2,
  BT_MALFORMED_RECORD = 3,
  BT_TRIAL_TIME_CEILING = 4,
  BT_NO_CONVERGING_SETTING = 5,
  BT_UNKNOWN_PARENT = 6,
  BT_DUPLICATE_BRANCH = 7,
  BT_UNKNOWN_BRANCH = 8,
  BT_WRONG_BRANCH_TYPE = 9,
  BT_IO = 10,
  BT_INTERNAL = 99
} bt_status;

typedef enum bt_label { BT_LABEL_CONVERGING = 0, BT_LABEL_DIVERGED = 1, BT_LABEL_UNSTABLE = 2 } bt_label;

typedef struct bt_summary {
  double speed;
  double noise;
  double range_x;
  double range_t;
  bt_label label;
} bt_summary;

typedef struct bt_result_summary {
  double final_metric;
  int64_t total_clocks;
  double wall_seconds;
  double overhead_fraction;
  int32_t retunes;
  int64_t tuning_clocks;
  int32_t reached_threshold;
} bt_result_summary;

typedef struct bt_session bt_session;
typedef struct bt_result bt_result;

BT_API const char* bt_version(void);
BT_API const char* bt_last_error(void);
BT_API const char* bt_status_name(bt_status status);
BT_API void bt_string_free(char* text);

/* Summarizes a progress trace of n (t, x) points. k <= 0 means 10 windows,
 * epsilon <= 0 means 1/k. */
BT_API bt_status bt_summarize(const double* t, const double* x, size_t n, int k, double epsilon, bt_summary* out);

BT_API bt_status bt_session_create(const char* config_path, bt_session** out);
BT_API bt_status bt_session_create_from_json(const char* json_text, bt_session** out);
/* Overrides one dotted config key ("tuner.mode", "task.seed"). The value is
 * read as JSON when it parses and as a string otherwise. Unknown keys and bad
 * types fail here; checks that span several keys wait for bt_session_run. */
BT_API bt_status bt_session_set(bt_session* session, const char* key, const char* value);
BT_API void bt_session_destroy(bt_session* session);

/* Runs the session. out_dir may be NULL to skip writing files. */
BT_API bt_status bt_session_run(bt_session* session, const char* out_dir, bt_result** out);
BT_API bt_status bt_result_get_summary(const bt_result* result, bt_result_summary* out);
BT_API bt_status bt_result_get_mode(const bt_result* result, char** out);
BT_API bt_status bt_result_get_json(const bt_result* result, char** out);
BT_API bt_status bt_result_get_log(const bt_result* result, char** out);
BT_API void bt_result_destroy(bt_result* result);

/* Replays the protocol messages of a JSON-lines session log through the
 * validator. details (optional) receives one violation per line. */
BT_API bt_status bt_validate_log(const char* jsonl, size_t* violations, char** details);

/* Builds the comparison report over run directories: CSV to out_csv, curves
 * next to it, text table through table (optional). */
BT_API bt_status bt_report(const char* const* dirs, size_t n, const char* out_csv, char** table);

#ifdef __cplusplus
}
#endif

#endif  // BRANCHTUNE_BRANCHTUNE_H_
