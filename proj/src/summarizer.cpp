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

#include "branchtune/summarizer.hpp"

#include <algorithm>
#include <cmath>

namespace branchtune {

std::string_view to_string(Label label) {
  switch (label) {
    case Label::kConverging: return "CONVERGING";
    case Label::kDiverged: return "DIVERGED";
    case Label::kUnstable: return "UNSTABLE";
  }
  return "?";
}

ProgressTrace downsample(std::span<const TracePoint> trace, int k) {
  const std::size_t n = trace.size();
  const std::size_t windows = std::min<std::size_t>(static_cast<std::size_t>(std::max(k, 1)), n);
  ProgressTrace out;
  out.reserve(windows);
  if (windows == 0) return out;
  const std::size_t base = n / windows;
  const std::size_t extra = n % windows;
  std::size_t begin = 0;
  for (std::size_t w = 0; w < windows; ++w) {
    const std::size_t size = base + (w < extra ? 1 : 0);
    double t_sum = 0.0;
    double x_sum = 0.0;
    for (std::size_t i = begin; i < begin + size; ++i) {
      t_sum += trace[i].t;
      x_sum += trace[i].x;
    }
    out.push_back({t_sum / static_cast<double>(size), x_sum / static_cast<double>(size)});
    begin += size;
  }
  return out;
}

double noise(std::span<const TracePoint> windows) {
  double rise = 0.0;
  for (std::size_t i = 1; i < windows.size(); ++i)
    rise = std::max(rise, windows[i].x - windows[i - 1].x);
  return rise;
}

Summary summarize(std::span<const TracePoint> trace, const SummarizerConfig& config) {
  Summary summary;
  if (trace.empty()) return summary;

  // Averaging a non-finite point into a window would poison it, so check raw.
  for (const auto& p : trace) {
    if (!std::isfinite(p.x)) {
      summary.label = Label::kDiverged;
      return summary;
    }
  }

  const ProgressTrace windows = downsample(trace, config.k);
  summary.range_x = windows.back().x - windows.front().x;
  summary.range_t = windows.back().t - windows.front().t;
  summary.noise = noise(windows);
  if (summary.range_t > 0.0)
    summary.speed = std::max((-summary.range_x - summary.noise) / summary.range_t, 0.0);

  const bool full_windows = static_cast<int>(windows.size()) == config.k;
  const bool converging = full_windows && summary.range_t > 0.0 && summary.range_x < 0.0 &&
                          summary.noise < config.effective_epsilon() * std::abs(summary.range_x);
  summary.label = converging ? Label::kConverging : Label::kUnstable;
  return summary;
}

}  // namespace branchtune
