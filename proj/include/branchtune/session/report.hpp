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
#include <string>
#include <vector>

namespace branchtune::session {

/// One row of the comparison table, read back from a run directory.
struct ReportRow {
  std::string mode;
  std::uint64_t seed = 0;
  double final_metric = 0.0;
  std::int64_t total_clocks = 0;
  double wall_seconds = 0.0;
  double overhead_fraction = 0.0;
  int retunes = 0;
  std::string source;  // run directory
};

/// Reads result.json from a run directory.
ReportRow load_row(const std::string& dir);

/// Rows sorted by total clocks (stable).
std::vector<ReportRow> sort_rows(std::vector<ReportRow> rows);

/// mode,seed,final_metric,total_clocks,wall_seconds,overhead_fraction,retunes
std::string report_csv(const std::vector<ReportRow>& rows);
std::string report_table(const std::vector<ReportRow>& rows);

/// Time-to-metric curves of every run: mode,seed,lineage,clock,time,metric.
std::string curves_csv(const std::vector<std::string>& dirs, const std::vector<ReportRow>& rows);

/// Builds the report for run directories: writes the CSV to `out_path`, the
/// curves next to it (<stem>_curves.csv), and returns the text table.
std::string write_report(const std::vector<std::string>& dirs, const std::string& out_path);

}  // namespace branchtune::session
