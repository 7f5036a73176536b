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
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "branchtune/search_space.hpp"

namespace branchtune {

enum class SearchAlgorithm { kRandom, kGrid, kTpe };

std::string_view to_string(SearchAlgorithm algorithm);
std::optional<SearchAlgorithm> parse_search_algorithm(std::string_view text);

struct Observation {
  TunableSetting setting;
  double speed = 0.0;
};

struct TpeOptions {
  double gamma = 0.25;   // fraction of history treated as good
  int n_startup = 5;     // observations before the model is used
  int candidates = 24;   // draws from the good density per proposal
  double min_bandwidth_fraction = 1.0 / 20.0;
};

/// The stop rule on its own: at least five non-zero speeds whose top five
/// lie within 10% of the best.
bool top_speeds_agree(std::span<const double> speeds);

/// Proposes settings and records their convergence speeds. Proposals are a
/// pure function of (seed, history, proposal count).
class Searcher {
 public:
  Searcher(SearchSpace space, SearchAlgorithm algorithm, std::uint64_t seed, int grid_points = 10,
           TpeOptions tpe = {});

  /// Next setting to try; nullopt once a grid is exhausted.
  std::optional<TunableSetting> propose();
  void observe(Observation obs);
  bool should_stop() const;

  const SearchSpace& space() const { return space_; }
  SearchAlgorithm algorithm() const { return algorithm_; }
  const std::vector<Observation>& history() const { return history_; }
  std::uint64_t proposals() const { return proposals_; }
  bool exhausted() const { return exhausted_; }
  std::size_t grid_size() const;

  /// Indices into history() for the good/bad split TPE would use now.
  struct Split {
    std::vector<std::size_t> good;
    std::vector<std::size_t> bad;
  };
  Split split() const;

 private:
  SearchSpace space_;
  SearchAlgorithm algorithm_;
  std::uint64_t seed_;
  int grid_points_;
  TpeOptions tpe_;
  std::vector<Observation> history_;
  std::uint64_t proposals_ = 0;
  std::uint64_t grid_cursor_ = 0;
  bool exhausted_ = false;
};

}  // namespace branchtune
