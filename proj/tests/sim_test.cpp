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
#include <numeric>
#include <random>

#include "branchtune/sim/optimizer.hpp"
#include "branchtune/sim/param_store.hpp"
#include "branchtune/sim/task.hpp"
#include "branchtune/sim/trainer.hpp"
#include "doctest.h"

using namespace branchtune;
using namespace branchtune::sim;

namespace {

TaskSpec task_spec(TaskKind kind, std::uint64_t seed = 1) {
  TaskSpec spec;
  spec.kind = kind;
  spec.seed = seed;
  if (kind == TaskKind::kMatrixFact) spec.rows = 30, spec.cols = 20, spec.rank = 3;
  return spec;
}

TrainerConfig trainer_cfg(OptimizerKind kind = OptimizerKind::kSgdMomentum, int workers = 4) {
  TrainerConfig cfg;
  cfg.workers = workers;
  cfg.optimizer.kind = kind;
  cfg.binding = {{"lr", TunableRole::kLearningRate},
                 {"momentum", TunableRole::kMomentum},
                 {"batch", TunableRole::kBatchSize},
                 {"staleness", TunableRole::kStaleness}};
  return cfg;
}

protocol::Message fork(std::int64_t clock, std::int64_t id, std::int64_t parent, TunableSetting s = {},
                       BranchType type = BranchType::kTraining) {
  return protocol::ForkBranch{ClockValue{clock}, BranchId{id}, BranchId{parent}, std::move(s), type};
}

std::vector<double> run(SimTrainer& t, std::int64_t branch, int clocks) {
  std::vector<double> out;
  for (int i = 0; i < clocks; ++i) out.push_back(aggregate_progress(t.run_clock(BranchId{branch})));
  return out;
}

std::vector<double> copy(std::span<const double> v) { return {v.begin(), v.end()}; }

}  // namespace

TEST_CASE("gradients match central differences") {
  for (auto kind : {TaskKind::kNoisyQuadratic, TaskKind::kLogisticBlobs, TaskKind::kMatrixFact}) {
    auto task = make_task(task_spec(kind, 4));
    std::mt19937_64 rng(17);
    std::normal_distribution<double> gauss(0, 1);
    std::vector<std::size_t> batch(std::min<std::size_t>(task->train_size(), 40));
    std::uniform_int_distribution<std::size_t> pick(0, task->train_size() - 1);
    for (int point = 0; point < 10; ++point) {
      std::vector<double> p = task->initial_params();
      for (auto& v : p) v += 0.5 * gauss(rng);
      for (auto& b : batch) b = pick(rng);
      std::vector<double> g(p.size(), 0.0);
      task->batch_loss_grad(p, batch, g);
      for (std::size_t i = 0; i < p.size(); i += 1 + p.size() / 25) {
        const double h = 1e-6 * std::max(1.0, std::fabs(p[i]));
        auto q = p;
        q[i] = p[i] + h;
        const double up = task->batch_loss(q, batch);
        q[i] = p[i] - h;
        const double down = task->batch_loss(q, batch);
        const double fd = (up - down) / (2 * h);
        CHECK(std::fabs(fd - g[i]) <= 1e-5 * std::max({std::fabs(fd), std::fabs(g[i]), 1.0}));
      }
    }
  }
}

TEST_CASE("one optimizer step by hand") {
  const std::vector<double> g = {0.5, -2.0};
  auto step = [&](OptimizerSpec spec, double lr, double m, int times = 1) {
    OptimizerState st;
    std::vector<double> p = {1.0, 1.0};
    for (int i = 0; i < times; ++i) apply_update(spec, st, p, g, lr, m);
    return p;
  };
  OptimizerSpec sgd;
  CHECK(step(sgd, 0.1, 0.0) == std::vector<double>{0.95, 1.2});
  // Two heavy-ball steps: v1 = -lr g, v2 = m v1 - lr g.
  auto p = step(sgd, 0.1, 0.5, 2);
  CHECK(p[0] == doctest::Approx(1.0 - 0.05 - (0.025 + 0.05)));
  OptimizerSpec damp = sgd;
  damp.dampened_momentum = true;
  p = step(damp, 0.1, 0.5, 2);
  CHECK(p[0] == doctest::Approx(1.0 - 0.025 - (0.0125 + 0.025)));

  OptimizerSpec ada;
  ada.kind = OptimizerKind::kAdaGrad;
  p = step(ada, 0.1, 0.0);
  CHECK(p[0] == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)));
  CHECK(p[1] == doctest::Approx(1.0 + 0.1 * 2.0 / (2.0 + 1e-8)));
  p = step(ada, 0.1, 0.0, 2);
  CHECK(p[0] == doctest::Approx(1.0 - 0.1 - 0.1 * 0.5 / std::sqrt(0.5)));

  OptimizerSpec rms;
  rms.kind = OptimizerKind::kRmsProp;
  p = step(rms, 0.01, 0.0);
  CHECK(p[0] == doctest::Approx(1.0 - 0.01 * 0.5 / std::sqrt(0.1 * 0.25)));
  CHECK(p[1] == doctest::Approx(1.0 + 0.01 * 2.0 / std::sqrt(0.1 * 4.0)));

  OptimizerSpec adam;
  adam.kind = OptimizerKind::kAdam;
  p = step(adam, 0.01, 0.0);
  // Bias correction makes the first step lr * sign(g).
  CHECK(p[0] == doctest::Approx(0.99));
  CHECK(p[1] == doctest::Approx(1.01));
  p = step(adam, 0.01, 0.0, 2);
  const double m2 = (0.9 * 0.05 + 0.05) / (1 - 0.81);
  const double v2 = (0.999 * 0.00025 + 0.00025) / (1 - 0.999 * 0.999);
  CHECK(p[0] == doctest::Approx(0.99 - 0.01 * m2 / (std::sqrt(v2) + 1e-8)));
}

TEST_CASE("sparse update matches dense where exact") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss(0, 1);
  for (auto kind : {OptimizerKind::kSgdMomentum, OptimizerKind::kAdaGrad}) {
    OptimizerSpec spec;
    spec.kind = kind;
    REQUIRE(sparse_update_exact(spec, 0.0));
    CHECK_FALSE(sparse_update_exact(spec, 0.5));
    OptimizerState a, b;
    std::vector<double> pa(50, 1.0), pb(50, 1.0);
    for (int step = 0; step < 20; ++step) {
      std::vector<double> g(50, 0.0);
      std::vector<std::size_t> idx;
      for (std::size_t i = step % 3; i < 50; i += 3 + step % 4) idx.push_back(i), g[i] = gauss(rng);
      apply_update(spec, a, pa, g, 0.1, 0.0);
      apply_sparse_update(spec, b, pb, g, idx, 0.1);
    }
    CHECK(pa == pb);
  }
  OptimizerSpec adam;
  adam.kind = OptimizerKind::kAdam;
  CHECK_FALSE(sparse_update_exact(adam, 0.0));
}

TEST_CASE("param store forks, versions and pools") {
  BranchedParamStore store({{"w", 0, 3}}, 2);
  store.create(BranchId{0}, std::vector<double>{1, 2, 3});
  store.fork(BranchId{1}, BranchId{0});
  store.current(BranchId{0})[0] = 9;
  CHECK(store.current(BranchId{1})[0] == 1);
  store.advance(BranchId{0});
  store.current(BranchId{0})[1] = 7;
  CHECK(store.version(BranchId{0}, 1)[1] == 2);
  CHECK(store.version(BranchId{0}, 5)[0] == 9);
  CHECK(store.get(BranchId{0}, "w")[1] == 7);
  CHECK(store.version_count(BranchId{0}) == 1);
  CHECK(store.available_lag(BranchId{0}) == 1);
  CHECK(store.available_lag(BranchId{1}) == 0);

  BranchedParamStore pool({{"w", 0, 4}}, 1);
  pool.create(BranchId{0}, std::vector<double>(4, 0.0));
  std::vector<std::int64_t> live;
  std::mt19937_64 rng(1);
  for (std::int64_t id = 1; id <= 100; ++id) {
    if (live.size() == 2) {
      const std::size_t k = rng() % 2;
      pool.free(BranchId{live[k]});
      live.erase(live.begin() + static_cast<std::ptrdiff_t>(k));
    }
    pool.fork(BranchId{id}, BranchId{live.empty() || rng() % 2 ? 0 : live.back()});
    live.push_back(id);
    CHECK(pool.live() <= 3);
  }
  CHECK(pool.allocations() <= 3);
}

TEST_CASE("fork isolates the child") {
  auto task = make_task(task_spec(TaskKind::kNoisyQuadratic));
  SimTrainer t(task, trainer_cfg());
  run(t, 0, 3);
  t.handle(fork(3, 1, 0));
  const auto at_fork = copy(t.params(BranchId{0}));
  run(t, 0, 5);
  CHECK(copy(t.params(BranchId{1})) == at_fork);
  CHECK(copy(t.params(BranchId{0})) != at_fork);

  // Fork, free, fork again from the same parent state: same trajectory.
  SimTrainer u(task, trainer_cfg());
  u.handle(fork(0, 1, 0, {{"lr", 0.05}}));
  const auto first = run(u, 1, 6);
  u.handle(protocol::FreeBranch{ClockValue{6}, BranchId{1}});
  u.handle(fork(6, 2, 0, {{"lr", 0.05}}));
  CHECK(run(u, 2, 6) == first);

  // Freeing the parent leaves a live child alone.
  u.handle(fork(12, 3, 2));
  const auto child = copy(u.params(BranchId{3}));
  u.handle(protocol::FreeBranch{ClockValue{12}, BranchId{2}});
  CHECK(copy(u.params(BranchId{3})) == child);
  CHECK_NOTHROW(run(u, 3, 2));
}

TEST_CASE("batch size tunable sets samples per clock") {
  auto task = make_task(task_spec(TaskKind::kLogisticBlobs));
  SimTrainer t(task, trainer_cfg());
  t.handle(fork(0, 1, 0, {{"batch", 8}}));
  t.run_clock(BranchId{1});
  CHECK(t.samples_last_clock() == 8 * 4);
  t.run_clock(kRootBranch);
  CHECK(t.samples_last_clock() == 32 * 4);
  CHECK(t.clock_seconds(8) == doctest::Approx(0.01 + 1e-4 * 32));
}

TEST_CASE("step size past the stability bound diverges") {
  auto task = make_task(task_spec(TaskKind::kNoisyQuadratic));
  REQUIRE(task->max_curvature());
  const double bound = 2.0 / *task->max_curvature();
  TrainerConfig cfg = trainer_cfg();
  cfg.root.batch_size = static_cast<int>(task->train_size());
  cfg.root.learning_rate = 1.5 * bound;
  SimTrainer t(task, cfg);
  auto losses = run(t, 0, 3000);
  CHECK_FALSE(std::isfinite(losses.back()));

  cfg.root.learning_rate = 0.5 * bound;
  SimTrainer ok(task, cfg);
  losses = run(ok, 0, 300);
  CHECK(std::isfinite(losses.back()));
  CHECK(losses.back() < losses.front());
}

TEST_CASE("one synchronous worker is plain sequential SGD") {
  auto task = make_task(task_spec(TaskKind::kNoisyQuadratic));
  TrainerConfig cfg = trainer_cfg(OptimizerKind::kSgdMomentum, 1);
  cfg.root.learning_rate = 0.02;
  SimTrainer t(task, cfg);
  std::vector<double> p = task->initial_params();
  for (int c = 0; c < 200; ++c) {
    t.run_clock(kRootBranch);
    const auto& batch = t.last_batches()[0];
    std::vector<double> g(p.size(), 0.0);
    task->batch_loss_grad(p, batch, g);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= 0.02 * g[i];
  }
  CHECK(copy(t.params(kRootBranch)) == p);
}

TEST_CASE("zero step size leaves the loss alone") {
  auto task = make_task(task_spec(TaskKind::kLogisticBlobs));
  TrainerConfig cfg = trainer_cfg();
  cfg.root.learning_rate = 0.0;
  cfg.root.batch_size = static_cast<int>(task->train_size());
  SimTrainer t(task, cfg);
  const auto start = copy(t.params(kRootBranch));
  // Workers see their shard in a new order each epoch, so the summed loss
  // may differ in the last bits.
  const auto losses = run(t, 0, 20);
  for (double l : losses) CHECK(l == doctest::Approx(losses.front()).epsilon(1e-12));
  CHECK(copy(t.params(kRootBranch)) == start);
}

TEST_CASE("aggregation sums in order") {
  CHECK(aggregate_progress(std::vector<double>{1.0, 2.0, 3.0}) == 6.0);
  CHECK(aggregate_progress(std::vector<double>{2.5}) == 2.5);
  CHECK(std::isnan(aggregate_progress(std::vector<double>{1.0, std::nan("")})));
  CHECK(std::isinf(aggregate_progress(std::vector<double>{1.0, INFINITY})));
}

TEST_CASE("testing branches") {
  TaskSpec spec = task_spec(TaskKind::kLogisticBlobs);
  spec.separation = 12.0;
  auto task = make_task(spec);
  TrainerConfig cfg = trainer_cfg();
  cfg.root.learning_rate = 0.5;
  SimTrainer t(task, cfg);
  CHECK_THROWS_AS(t.test_branch(kRootBranch), Error);
  run(t, 0, 200);
  t.handle(fork(200, 1, 0, {}, BranchType::kTesting));
  CHECK(t.test_branch(BranchId{1}) == 1.0);
  CHECK_THROWS_AS(t.run_clock(BranchId{1}), Error);
  auto reply = t.handle(protocol::ScheduleBranch{ClockValue{200}, BranchId{1}});
  REQUIRE(reply);
  CHECK(reply->progress == 1.0);

  double mean = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    TaskSpec s = task_spec(TaskKind::kLogisticBlobs, seed);
    auto fresh = make_task(s);
    mean += fresh->validation_metric(fresh->initial_params()) / 20;
  }
  CHECK(mean == doctest::Approx(0.5).epsilon(0.1));

  auto mf = make_task(task_spec(TaskKind::kMatrixFact));
  SimTrainer m(mf, trainer_cfg(OptimizerKind::kAdaGrad));
  run(m, 0, 10);
  m.handle(fork(10, 1, 0, {}, BranchType::kTesting));
  CHECK(m.test_branch(BranchId{1}) == mf->objective(m.params(kRootBranch)));
  CHECK_FALSE(mf->metric_higher_is_better());
}

TEST_CASE("backend rejects bad references") {
  auto task = make_task(task_spec(TaskKind::kNoisyQuadratic));
  SimTrainer t(task, trainer_cfg());
  t.handle(fork(0, 1, 0));
  t.handle(protocol::FreeBranch{ClockValue{0}, BranchId{1}});
  auto code_of = [&](const protocol::Message& m) {
    try {
      t.handle(m);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kInvalidArgument;
  };
  CHECK(code_of(protocol::ScheduleBranch{ClockValue{1}, BranchId{1}}) == ErrorCode::kUnknownBranch);
  CHECK(code_of(protocol::FreeBranch{ClockValue{1}, BranchId{1}}) == ErrorCode::kUnknownBranch);
  CHECK(code_of(fork(1, 2, 1)) == ErrorCode::kUnknownParent);
  CHECK(code_of(fork(1, 1, 0)) == ErrorCode::kDuplicateBranch);
}

TEST_CASE("windowed loss falls inside the stable region") {
  auto task = make_task(task_spec(TaskKind::kNoisyQuadratic));
  TrainerConfig cfg = trainer_cfg();
  cfg.root.learning_rate = 0.2 / *task->max_curvature();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    cfg.stream_seed = seed;
    SimTrainer t(task, cfg);
    auto losses = run(t, 0, 80);
    std::vector<double> windows;
    for (int w = 0; w < 4; ++w)
      windows.push_back(std::accumulate(losses.begin() + w * 20, losses.begin() + (w + 1) * 20, 0.0));
    for (int w = 1; w < 4; ++w) CHECK(windows[w] < windows[w - 1]);
  }
}

TEST_CASE("staleness bound is honored") {
  auto task = make_task(task_spec(TaskKind::kNoisyQuadratic));
  for (int s : {0, 1, 3, 7}) {
    SimTrainer t(task, trainer_cfg());
    t.handle(fork(0, 1, 0, {{"staleness", double(s)}}));
    run(t, 1, 50);
    CHECK(t.max_observed_lag() == s);
  }
}

TEST_CASE("unbound tunables are ignored with one warning") {
  auto task = make_task(task_spec(TaskKind::kNoisyQuadratic));
  SimTrainer t(task, trainer_cfg());
  t.handle(fork(0, 1, 0, {{"lr", 0.03}, {"lr_copy", 5.0}}));
  t.handle(fork(0, 2, 0, {{"lr", 0.03}, {"lr_copy", 7.0}}));
  CHECK(t.tunables(BranchId{1}).learning_rate == 0.03);
  CHECK(run(t, 1, 5) == run(t, 2, 5));
  CHECK(t.warnings().size() == 1);
}

TEST_CASE("loss threshold recipe reproduces the whole-pass fixture") {
  TaskSpec spec;
  spec.kind = TaskKind::kMatrixFact;
  spec.rows = 100, spec.cols = 80, spec.rank = 5, spec.noise = 0.1, spec.seed = 1;
  TrainerConfig cfg = trainer_cfg(OptimizerKind::kAdaGrad);
  cfg.root.batch_size = 2000;
  std::vector<double> lrs;
  for (int x = -5; x <= 0; ++x) lrs.push_back(std::pow(10.0, x));
  const double threshold = calibrate_loss_threshold(make_task(spec), cfg, lrs);
  CHECK(threshold == doctest::Approx(36.7551).epsilon(1e-6));
}
