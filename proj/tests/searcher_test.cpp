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

#include <algorithm>
#include <cmath>
#include <random>

#include "branchtune/searcher.hpp"
#include "doctest.h"

using namespace branchtune;

namespace {

SearchSpace lr_space() { return SearchSpace({TunableSpec::log("lr", 1e-5, 1.0)}); }

SearchSpace mixed_space() {
  return SearchSpace({TunableSpec::log("lr", 1e-5, 1.0), TunableSpec::linear("momentum", 0.0, 0.9),
                      TunableSpec::discrete("batch", {2, 4, 8, 16, 32}),
                      TunableSpec::discrete("staleness", {0, 1, 3, 7})});
}

std::vector<double> log_lrs(Searcher& s, int n) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(std::log10(s.propose()->at("lr")));
  std::sort(out.begin(), out.end());
  return out;
}

// Largest gap between two empirical CDFs.
double ks_distance(const std::vector<double>& a, const std::vector<double>& b) {
  std::size_t i = 0, j = 0;
  double d = 0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::fabs(double(i) / a.size() - double(j) / b.size()));
  }
  return d;
}

}  // namespace

TEST_CASE("random log dimension is uniform in the exponent") {
  Searcher s(lr_space(), SearchAlgorithm::kRandom, 3);
  int below = 0;
  for (int i = 0; i < 10000; ++i) below += s.propose()->at("lr") < 1e-3;
  CHECK(below / 10000.0 == doctest::Approx(0.4).epsilon(0.05));
}

TEST_CASE("grid over one discrete dimension") {
  Searcher s(SearchSpace({TunableSpec::discrete("staleness", {0, 1, 3, 7})}), SearchAlgorithm::kGrid, 1, 17);
  std::vector<double> seen;
  for (int i = 0; i < 4; ++i) {
    auto p = s.propose();
    REQUIRE(p);
    seen.push_back(p->at("staleness"));
  }
  CHECK_FALSE(s.propose());
  CHECK(s.exhausted());
  CHECK(s.should_stop());
  std::sort(seen.begin(), seen.end());
  CHECK(seen == std::vector<double>{0, 1, 3, 7});
}

TEST_CASE("grid visits every cell once") {
  SearchSpace space({TunableSpec::linear("a", 0, 1), TunableSpec::log("b", 1e-3, 1),
                     TunableSpec::discrete("c", {1, 2})});
  Searcher s(space, SearchAlgorithm::kGrid, 1, 4);
  CHECK(s.grid_size() == 32);
  std::set<TunableSetting> cells;
  while (auto p = s.propose()) {
    CHECK(space.contains(*p));
    cells.insert(*p);
  }
  CHECK(cells.size() == 32);
  std::set<double> bs;
  for (const auto& c : cells) bs.insert(c.at("b"));
  std::vector<double> axis(bs.begin(), bs.end());
  REQUIRE(axis.size() == 4);
  CHECK(axis.front() == doctest::Approx(1e-3));
  CHECK(axis[1] == doctest::Approx(1e-2));
  CHECK(axis.back() == doctest::Approx(1.0));
}

TEST_CASE("TPE concentrates near good history") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-5, 0);
  Searcher tpe(lr_space(), SearchAlgorithm::kTpe, 8);
  Searcher rnd(lr_space(), SearchAlgorithm::kRandom, 8);
  for (int i = 0; i < 40; ++i) {
    const double e = u(rng);
    tpe.observe({{{"lr", std::pow(10.0, e)}}, std::exp(-(e + 2) * (e + 2))});
  }
  const auto a = log_lrs(tpe, 1000);
  const auto b = log_lrs(rnd, 1000);
  CHECK(std::fabs(a[500] + 2.0) < 1.0);
  const double tpe_spread = a[750] - a[250];
  const double rnd_spread = b[750] - b[250];
  CHECK(rnd_spread == doctest::Approx(2.5).epsilon(0.1));
  CHECK(tpe_spread < rnd_spread / 2);
}

TEST_CASE("TPE with equal speeds behaves like random") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-5, 0);
  Searcher tpe(lr_space(), SearchAlgorithm::kTpe, 4);
  for (int i = 0; i < 30; ++i) tpe.observe({{{"lr", std::pow(10.0, u(rng))}}, 0.5});
  Searcher rnd(lr_space(), SearchAlgorithm::kRandom, 99);
  CHECK(ks_distance(log_lrs(tpe, 5000), log_lrs(rnd, 5000)) < 0.1);
}

TEST_CASE("split membership") {
  Searcher s(lr_space(), SearchAlgorithm::kTpe, 1);
  s.observe({{{"lr", 0.1}}, 2.0});
  auto parts = s.split();
  CHECK(parts.good == std::vector<std::size_t>{0});
  CHECK(parts.bad.empty());

  for (double v : {1.0, 3.0, 0.0, 0.5, 4.0, 2.5, 1.5}) s.observe({{{"lr", 0.01}}, v});
  parts = s.split();
  // 8 observations, gamma 0.25: the two fastest are good.
  CHECK(parts.good.size() == 2);
  CHECK(std::count(parts.bad.begin(), parts.bad.end(), std::size_t{3}) == 1);
  std::vector<std::size_t> good = parts.good;
  std::sort(good.begin(), good.end());
  CHECK(good == std::vector<std::size_t>{2, 5});
}

TEST_CASE("proposals are reproducible from seed and history") {
  for (auto algo : {SearchAlgorithm::kRandom, SearchAlgorithm::kTpe}) {
    Searcher a(mixed_space(), algo, 77), b(mixed_space(), algo, 77);
    for (int i = 0; i < 30; ++i) {
      auto pa = a.propose(), pb = b.propose();
      REQUIRE(pa);
      CHECK(*pa == *pb);
      const double speed = std::fabs(std::log10(pa->at("lr")) + 3);
      a.observe({*pa, speed});
      b.observe({*pb, speed});
    }
  }
}

TEST_CASE("every proposal is inside the space") {
  std::mt19937_64 rng(4);
  for (int iter = 0; iter < 30; ++iter) {
    std::uniform_real_distribution<double> u(-3, 3);
    double lo = u(rng), hi = lo + 0.5 + std::fabs(u(rng));
    SearchSpace space({TunableSpec::linear("a", lo, hi), TunableSpec::log("b", std::pow(10, lo), std::pow(10, hi)),
                       TunableSpec::discrete("c", {lo, hi, 7.0})});
    for (auto algo : {SearchAlgorithm::kRandom, SearchAlgorithm::kTpe, SearchAlgorithm::kGrid}) {
      Searcher s(space, algo, iter);
      for (int i = 0; i < 60; ++i) {
        auto p = s.propose();
        if (!p) break;
        CHECK(space.contains(*p));
        s.observe({*p, i % 4 == 0 ? 0.0 : p->at("a") - lo});
      }
    }
  }
}

TEST_CASE("top five rule") {
  auto stop = [](std::vector<double> v) { return top_speeds_agree(v); };
  CHECK(stop({1.00, 0.99, 0.97, 0.95, 0.92}));
  CHECK_FALSE(stop({1.00, 0.99, 0.97, 0.95, 0.80}));
  CHECK_FALSE(stop({1.0, 0, 0, 0, 0}));
  // Only the five largest count; zeros never do.
  CHECK(stop({0.1, 1.00, 0, 0.99, 0.97, 0.2, 0.95, 0.92}));
  CHECK(stop({1.0, 1.0, 1.0, 1.0, 1.0}));
  CHECK_FALSE(stop({1.0, 1.0, 1.0, 1.0}));

  Searcher s(lr_space(), SearchAlgorithm::kTpe, 1);
  for (double v : {1.00, 0.99, 0.97, 0.95}) s.observe({{{"lr", 0.1}}, v});
  CHECK_FALSE(s.should_stop());
  s.observe({{{"lr", 0.1}}, 0.92});
  CHECK(s.should_stop());
}

TEST_CASE("space validation") {
  CHECK_THROWS_AS(TunableSpec::log("x", 0.0, 1.0).validate(), Error);
  CHECK_THROWS_AS(TunableSpec::linear("x", 2.0, 1.0).validate(), Error);
  CHECK_THROWS_AS(TunableSpec::discrete("x", {}).validate(), Error);
  SearchSpace space = mixed_space();
  CHECK_FALSE(space.contains({{"lr", 0.1}}));
  CHECK_FALSE(space.contains({{"lr", 2.0}, {"momentum", 0}, {"batch", 2}, {"staleness", 0}}));
  CHECK_FALSE(space.contains({{"lr", 0.1}, {"momentum", 0}, {"batch", 3}, {"staleness", 0}}));
  CHECK(space.contains({{"lr", 0.1}, {"momentum", 0}, {"batch", 2}, {"staleness", 0}}));
}
