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

#include <cmath>
#include <limits>
#include <random>

#include "branchtune/summarizer.hpp"
#include "doctest.h"

using namespace branchtune;

namespace {

ProgressTrace trace_of(const std::vector<double>& xs, double t0 = 0.0, double dt = 1.0) {
  ProgressTrace tr;
  for (std::size_t i = 0; i < xs.size(); ++i) tr.push_back({t0 + dt * static_cast<double>(i), xs[i]});
  return tr;
}

}  // namespace

TEST_CASE("downsample windows") {
  auto tr = trace_of({10, 9, 8, 7, 6, 5, 4, 3, 2, 1});
  auto w = downsample(tr, 10);
  REQUIRE(w.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(w[i].t == tr[i].t);
    CHECK(w[i].x == tr[i].x);
  }

  std::vector<double> pairs;
  for (int i = 0; i < 10; ++i) pairs.insert(pairs.end(), {5, 3});
  for (const auto& p : downsample(trace_of(pairs), 10)) CHECK(p.x == 4.0);

  CHECK(downsample(trace_of({1, 2, 3, 4}), 10).size() == 4);
}

TEST_CASE("uneven windows put the extra point first") {
  // 23 points in 10 windows: three of size 3, seven of size 2.
  std::vector<double> xs(23);
  for (int i = 0; i < 23; ++i) xs[i] = i;
  auto w = downsample(trace_of(xs), 10);
  REQUIRE(w.size() == 10);
  CHECK(w[0].x == doctest::Approx(1.0));
  CHECK(w[2].x == doctest::Approx(7.0));
  CHECK(w[3].x == doctest::Approx(9.5));
  CHECK(w[9].x == doctest::Approx(21.5));
}

TEST_CASE("noise is the largest rise") {
  CHECK(noise(trace_of({10, 9, 8, 7, 6, 5, 4, 3, 2, 1})) == 0.0);
  CHECK(noise(trace_of({10, 9, 8, 7, 8, 7, 6, 5, 4, 3})) == 1.0);
  CHECK(noise(trace_of({5, 5, 5})) == 0.0);
  CHECK(noise(trace_of({5})) == 0.0);
}

TEST_CASE("summaries of the hand-worked traces") {
  auto s = summarize(trace_of({10, 9, 8, 7, 6, 5, 4, 3, 2, 1}));
  CHECK(s.speed == 1.0);
  CHECK(s.label == Label::kConverging);

  s = summarize(trace_of({10, 9, 8, 7, 8, 7, 6, 5, 4, 3}));
  CHECK(s.range_x == -7.0);
  CHECK(s.noise == 1.0);
  CHECK(s.speed == doctest::Approx(6.0 / 9.0).epsilon(1e-12));
  CHECK(s.label == Label::kUnstable);

  s = summarize(trace_of({10, 9, std::numeric_limits<double>::infinity(), 7, 6, 5, 4, 3, 2, 1}));
  CHECK(s.speed == 0.0);
  CHECK(s.label == Label::kDiverged);

  s = summarize(trace_of(std::vector<double>(10, 5.0)));
  CHECK(s.range_x == 0.0);
  CHECK(s.speed == 0.0);
  CHECK(s.label == Label::kUnstable);
}

TEST_CASE("short traces and custom k") {
  // Fewer windows than k is never converging.
  auto s = summarize(trace_of({4, 3, 2, 1}));
  CHECK(s.label == Label::kUnstable);
  CHECK(s.speed == 1.0);
  CHECK(summarize(trace_of({4, 3, 2, 1}), {4, 0.0}).label == Label::kConverging);
  CHECK(summarize(trace_of({1})).speed == 0.0);
  CHECK(summarize(trace_of({std::nan("")})).label == Label::kDiverged);
}

TEST_CASE("summary properties on random traces") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss(0, 1);
  std::uniform_real_distribution<double> unit(0.1, 3.0);
  for (int iter = 0; iter < 300; ++iter) {
    const int n = 5 + iter % 60;
    const double trend = -unit(rng);
    ProgressTrace tr;
    double t = 0;
    for (int i = 0; i < n; ++i) {
      t += unit(rng);
      tr.push_back({t, trend * i + gauss(rng) * (iter % 3)});
    }
    const Summary s = summarize(tr);
    CHECK(s.speed >= 0.0);
    if (s.label == Label::kConverging) {
      CHECK(s.range_x < 0);
      CHECK(s.noise < 0.1 * std::fabs(s.range_x));
    }

    // Time scale divides speed; loss offset changes nothing.
    const double c = unit(rng);
    ProgressTrace scaled = tr, shifted = tr;
    for (auto& p : scaled) p.t *= c;
    for (auto& p : shifted) p.x += 17.0;
    const Summary ss = summarize(scaled);
    const Summary sh = summarize(shifted);
    CHECK(ss.label == s.label);
    CHECK(ss.speed == doctest::Approx(s.speed / c).epsilon(1e-9));
    CHECK(sh.label == s.label);
    CHECK(sh.speed == doctest::Approx(s.speed).epsilon(1e-9));
  }
}

TEST_CASE("monotone decreasing one point per window") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> step(0.01, 2.0);
  for (int iter = 0; iter < 100; ++iter) {
    ProgressTrace tr;
    double t = 0, x = 100;
    for (int i = 0; i < 10; ++i) {
      tr.push_back({t, x});
      t += step(rng);
      x -= step(rng);
    }
    const Summary s = summarize(tr);
    CHECK(s.label == Label::kConverging);
    CHECK(s.speed == doctest::Approx((tr.front().x - tr.back().x) / (tr.back().t - tr.front().t)).epsilon(1e-12));
  }
}
