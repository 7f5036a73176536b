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

#include "branchtune/session/report.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "branchtune/types.hpp"
#include "format_util.hpp"
#include "json.hpp"

namespace branchtune::session {

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

// Numbers may be stored as strings when they are not finite.
double number(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string())
    if (auto v = detail::parse_double(j.get<std::string>())) return *v;
  throw Error(ErrorCode::kMalformedRecord, "expected a number in result.json");
}

}  // namespace

ReportRow load_row(const std::string& dir) {
  const auto path = std::filesystem::path(dir) / "result.json";
  auto j = nlohmann::json::parse(slurp(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::kMalformedRecord, path.string() + " is not JSON");
  ReportRow row;
  try {
    row.mode = j.at("mode").get<std::string>();
    row.seed = j.at("seed").get<std::uint64_t>();
    row.final_metric = number(j.at("final_metric"));
    row.total_clocks = j.at("total_clocks").get<std::int64_t>();
    row.wall_seconds = number(j.at("wall_seconds"));
    row.overhead_fraction = number(j.at("overhead_fraction"));
    row.retunes = j.at("retunes").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedRecord, path.string() + ": " + e.what());
  }
  row.source = dir;
  return row;
}

std::vector<ReportRow> sort_rows(std::vector<ReportRow> rows) {
  std::stable_sort(rows.begin(), rows.end(),
                   [](const ReportRow& a, const ReportRow& b) { return a.total_clocks < b.total_clocks; });
  return rows;
}

std::string report_csv(const std::vector<ReportRow>& rows) {
  std::string out = "mode,seed,final_metric,total_clocks,wall_seconds,overhead_fraction,retunes\n";
  for (const auto& r : rows) {
    out += r.mode + ',' + std::to_string(r.seed) + ',' + detail::format_double(r.final_metric) + ',' +
           std::to_string(r.total_clocks) + ',' + detail::format_double(r.wall_seconds) + ',' +
           detail::format_double(r.overhead_fraction) + ',' + std::to_string(r.retunes) + '\n';
  }
  return out;
}

std::string report_table(const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(9) << "mode" << std::right << std::setw(6) << "seed" << std::setw(14)
      << "final_metric" << std::setw(14) << "total_clocks" << std::setw(14) << "wall_seconds" << std::setw(10)
      << "overhead" << std::setw(9) << "retunes" << '\n';
  for (const auto& r : rows) {
    out << std::left << std::setw(9) << r.mode << std::right << std::setw(6) << r.seed << std::setw(14)
        << std::setprecision(6) << r.final_metric << std::setw(14) << r.total_clocks << std::setw(14)
        << std::fixed << std::setprecision(2) << r.wall_seconds << std::setw(10) << std::setprecision(3)
        << r.overhead_fraction << std::setw(9) << r.retunes << '\n';
    out << std::defaultfloat;
  }
  return out.str();
}

std::string curves_csv(const std::vector<std::string>& dirs, const std::vector<ReportRow>& rows) {
  std::string out = "mode,seed,lineage,clock,time,metric\n";
  for (const auto& row : rows) {
    if (std::find(dirs.begin(), dirs.end(), row.source) == dirs.end()) continue;
    std::istringstream in(slurp(std::filesystem::path(row.source) / "epochs.csv"));
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<std::string> cells;
      std::stringstream fields(line);
      for (std::string cell; std::getline(fields, cell, ',');) cells.push_back(cell);
      if (cells.size() != 6) throw Error(ErrorCode::kMalformedRecord, "bad epochs.csv line: " + line);
      out += row.mode + ',' + std::to_string(row.seed) + ',' + cells[0] + ',' + cells[3] + ',' + cells[4] + ',' +
             cells[5] + '\n';
    }
  }
  return out;
}

std::string write_report(const std::vector<std::string>& dirs, const std::string& out_path) {
  if (dirs.empty()) throw Error(ErrorCode::kInvalidArgument, "report needs at least one run directory");
  std::vector<ReportRow> rows;
  for (const auto& dir : dirs) rows.push_back(load_row(dir));
  rows = sort_rows(std::move(rows));

  auto write = [](const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
    out << text;
  };
  const std::filesystem::path csv(out_path);
  write(csv, report_csv(rows));
  auto curves = csv.parent_path() / (csv.stem().string() + "_curves.csv");
  write(curves, curves_csv(dirs, rows));
  return report_table(rows);
}

}  // namespace branchtune::session
