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

#include "branchtune/searcher.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace branchtune {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kSqrt2Pi = 2.5066282746310002;

double to_model(const TunableSpec& dim, double value) {
  return dim.kind == TunableKind::kLog ? std::log10(value) : value;
}

double from_model(const TunableSpec& dim, double z) {
  double value = dim.kind == TunableKind::kLog ? std::pow(10.0, z) : z;
  return std::clamp(value, dim.lo, dim.hi);
}

double model_lo(const TunableSpec& dim) { return to_model(dim, dim.lo); }
double model_hi(const TunableSpec& dim) { return to_model(dim, dim.hi); }

double sample_dimension_uniform(const TunableSpec& dim, std::mt19937_64& rng) {
  if (dim.kind == TunableKind::kDiscrete) {
    std::uniform_int_distribution<std::size_t> pick(0, dim.values.size() - 1);
    return dim.values[pick(rng)];
  }
  std::uniform_real_distribution<double> u(model_lo(dim), model_hi(dim));
  return from_model(dim, u(rng));
}

TunableSetting sample_uniform(const SearchSpace& space, std::mt19937_64& rng) {
  TunableSetting setting;
  for (const auto& dim : space.dims()) setting[dim.name] = sample_dimension_uniform(dim, rng);
  return setting;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

// Truncated Gaussian mixture on [lo, hi] with equal component weights. The
// last component is a broad prior over the whole range.
class ParzenDensity {
 public:
  ParzenDensity(std::vector<double> points, double lo, double hi, double min_fraction)
      : lo_(lo), hi_(hi) {
    const double range = hi - lo;
    std::sort(points.begin(), points.end());
    for (std::size_t i = 0; i < points.size(); ++i) {
      const double left = i == 0 ? lo : points[i - 1];
      const double right = i + 1 == points.size() ? hi : points[i + 1];
      double sigma = std::max(points[i] - left, right - points[i]);
      sigma = std::clamp(sigma, range * min_fraction, range);
      add(points[i], sigma);
    }
    add(0.5 * (lo + hi), range);
  }

  double sample(std::mt19937_64& rng) const {
    std::uniform_int_distribution<std::size_t> pick(0, mu_.size() - 1);
    const std::size_t c = pick(rng);
    std::normal_distribution<double> gauss(mu_[c], sigma_[c]);
    for (int attempt = 0; attempt < 64; ++attempt) {
      double z = gauss(rng);
      if (z >= lo_ && z <= hi_) return z;
    }
    return std::clamp(mu_[c], lo_, hi_);
  }

  double density(double z) const {
    double total = 0.0;
    for (std::size_t c = 0; c < mu_.size(); ++c) {
      const double u = (z - mu_[c]) / sigma_[c];
      total += std::exp(-0.5 * u * u) / (kSqrt2Pi * sigma_[c]) / mass_[c];
    }
    return total / static_cast<double>(mu_.size());
  }

 private:
  void add(double mu, double sigma) {
    mu_.push_back(mu);
    sigma_.push_back(sigma);
    double mass = normal_cdf((hi_ - mu) / sigma) - normal_cdf((lo_ - mu) / sigma);
    mass_.push_back(std::max(mass, 1e-12));
  }

  double lo_;
  double hi_;
  std::vector<double> mu_;
  std::vector<double> sigma_;
  std::vector<double> mass_;
};

// Add-one smoothed categorical over a discrete dimension.
class CategoricalDensity {
 public:
  CategoricalDensity(const std::vector<double>& values, const std::vector<double>& observed)
      : values_(values), weights_(values.size(), 1.0) {
    for (double v : observed) {
      auto it = std::find(values_.begin(), values_.end(), v);
      if (it != values_.end()) weights_[static_cast<std::size_t>(it - values_.begin())] += 1.0;
    }
    total_ = std::accumulate(weights_.begin(), weights_.end(), 0.0);
  }

  double sample(std::mt19937_64& rng) const {
    std::discrete_distribution<std::size_t> pick(weights_.begin(), weights_.end());
    return values_[pick(rng)];
  }

  double probability(double v) const {
    auto it = std::find(values_.begin(), values_.end(), v);
    if (it == values_.end()) return 0.0;
    return weights_[static_cast<std::size_t>(it - values_.begin())] / total_;
  }

 private:
  std::vector<double> values_;
  std::vector<double> weights_;
  double total_ = 0.0;
};

std::vector<double> grid_axis(const TunableSpec& dim, int points) {
  if (dim.kind == TunableKind::kDiscrete) return dim.values;
  const int n = std::max(points, 1);
  std::vector<double> axis;
  if (n == 1) {
    axis.push_back(dim.lo);
    return axis;
  }
  const double a = model_lo(dim);
  const double b = model_hi(dim);
  for (int i = 0; i < n; ++i) {
    if (i == 0) {
      axis.push_back(dim.lo);
    } else if (i == n - 1) {
      axis.push_back(dim.hi);
    } else {
      axis.push_back(from_model(dim, a + (b - a) * i / (n - 1)));
    }
  }
  return axis;
}

}  // namespace

std::string_view to_string(SearchAlgorithm algorithm) {
  switch (algorithm) {
    case SearchAlgorithm::kRandom: return "RANDOM";
    case SearchAlgorithm::kGrid: return "GRID";
    case SearchAlgorithm::kTpe: return "TPE";
  }
  return "?";
}

std::optional<SearchAlgorithm> parse_search_algorithm(std::string_view text) {
  if (text == "RANDOM" || text == "random") return SearchAlgorithm::kRandom;
  if (text == "GRID" || text == "grid") return SearchAlgorithm::kGrid;
  if (text == "TPE" || text == "tpe" || text == "hyperopt") return SearchAlgorithm::kTpe;
  return std::nullopt;
}

bool top_speeds_agree(std::span<const double> speeds) {
  std::vector<double> nonzero;
  for (double s : speeds)
    if (s > 0.0) nonzero.push_back(s);
  if (nonzero.size() < 5) return false;
  std::partial_sort(nonzero.begin(), nonzero.begin() + 5, nonzero.end(), std::greater<>());
  const double best = nonzero[0];
  const double fifth = nonzero[4];
  return (best - fifth) / best < 0.10;
}

Searcher::Searcher(SearchSpace space, SearchAlgorithm algorithm, std::uint64_t seed, int grid_points,
                   TpeOptions tpe)
    : space_(std::move(space)),
      algorithm_(algorithm),
      seed_(seed),
      grid_points_(grid_points),
      tpe_(tpe) {}

std::size_t Searcher::grid_size() const {
  std::size_t cells = 1;
  for (const auto& dim : space_.dims()) cells *= grid_axis(dim, grid_points_).size();
  return cells;
}

std::optional<TunableSetting> Searcher::propose() {
  std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                    static_cast<std::uint32_t>(proposals_), static_cast<std::uint32_t>(history_.size())};
  std::mt19937_64 rng(seq);

  if (algorithm_ == SearchAlgorithm::kGrid) {
    if (grid_cursor_ >= grid_size()) {
      exhausted_ = true;
      return std::nullopt;
    }
    // Mixed-radix decode, last dimension fastest.
    std::uint64_t index = grid_cursor_++;
    TunableSetting setting;
    const auto& dims = space_.dims();
    for (std::size_t d = dims.size(); d-- > 0;) {
      auto axis = grid_axis(dims[d], grid_points_);
      setting[dims[d].name] = axis[index % axis.size()];
      index /= axis.size();
    }
    ++proposals_;
    if (grid_cursor_ >= grid_size()) exhausted_ = true;
    return setting;
  }

  ++proposals_;
  if (algorithm_ == SearchAlgorithm::kRandom ||
      history_.size() < static_cast<std::size_t>(tpe_.n_startup))
    return sample_uniform(space_, rng);

  // Equal speeds carry no ranking information.
  const double first = history_.front().speed;
  const bool uninformative = std::all_of(history_.begin(), history_.end(),
                                         [&](const Observation& o) { return o.speed == first; });
  if (uninformative) return sample_uniform(space_, rng);

  const Split parts = split();
  const auto& dims = space_.dims();

  struct DimModel {
    std::optional<ParzenDensity> good_c, bad_c;
    std::optional<CategoricalDensity> good_d, bad_d;
  };
  std::vector<DimModel> models(dims.size());
  for (std::size_t d = 0; d < dims.size(); ++d) {
    const auto& dim = dims[d];
    std::vector<double> good_vals, bad_vals;
    for (auto i : parts.good) good_vals.push_back(history_[i].setting.at(dim.name));
    for (auto i : parts.bad) bad_vals.push_back(history_[i].setting.at(dim.name));
    if (dim.kind == TunableKind::kDiscrete) {
      models[d].good_d.emplace(dim.values, good_vals);
      models[d].bad_d.emplace(dim.values, bad_vals);
    } else {
      for (auto& v : good_vals) v = to_model(dim, v);
      for (auto& v : bad_vals) v = to_model(dim, v);
      models[d].good_c.emplace(good_vals, model_lo(dim), model_hi(dim), tpe_.min_bandwidth_fraction);
      models[d].bad_c.emplace(bad_vals, model_lo(dim), model_hi(dim), tpe_.min_bandwidth_fraction);
    }
  }

  TunableSetting best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < std::max(tpe_.candidates, 1); ++c) {
    TunableSetting candidate;
    double score = 0.0;
    for (std::size_t d = 0; d < dims.size(); ++d) {
      const auto& dim = dims[d];
      if (dim.kind == TunableKind::kDiscrete) {
        double v = models[d].good_d->sample(rng);
        score += std::log(models[d].good_d->probability(v)) - std::log(models[d].bad_d->probability(v));
        candidate[dim.name] = v;
      } else {
        double z = models[d].good_c->sample(rng);
        score += std::log(models[d].good_c->density(z) + 1e-300) -
                 std::log(models[d].bad_c->density(z) + 1e-300);
        candidate[dim.name] = from_model(dim, z);
      }
    }
    if (score > best_score) {
      best_score = score;
      best = std::move(candidate);
    }
  }
  return best;
}

void Searcher::observe(Observation obs) { history_.push_back(std::move(obs)); }

bool Searcher::should_stop() const {
  if (algorithm_ == SearchAlgorithm::kGrid && exhausted_) return true;
  std::vector<double> speeds;
  speeds.reserve(history_.size());
  for (const auto& o : history_) speeds.push_back(o.speed);
  return top_speeds_agree(speeds);
}

Searcher::Split Searcher::split() const {
  Split out;
  if (history_.empty()) return out;
  std::vector<std::size_t> order(history_.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return history_[a].speed > history_[b].speed;
  });
  const auto n = static_cast<double>(history_.size());
  std::size_t n_good = static_cast<std::size_t>(std::ceil(tpe_.gamma * n));
  n_good = std::clamp<std::size_t>(n_good, 1, history_.size());
  out.good.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_good));
  out.bad.assign(order.begin() + static_cast<std::ptrdiff_t>(n_good), order.end());
  return out;
}

}  // namespace branchtune
