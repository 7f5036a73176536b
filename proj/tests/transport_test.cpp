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

#include <sys/socket.h>
#include <unistd.h>

#include <thread>

#include "branchtune/controller.hpp"
#include "branchtune/event_log.hpp"
#include "branchtune/sim/trainer.hpp"
#include "branchtune/transport.hpp"
#include "doctest.h"

using namespace branchtune;

namespace {

sim::TrainerConfig trainer_cfg() {
  sim::TrainerConfig cfg;
  cfg.binding = {{"lr", sim::TunableRole::kLearningRate}};
  return cfg;
}

std::shared_ptr<const sim::Task> quadratic() { return sim::make_task(sim::TaskSpec{}); }

// A short tuning conversation; returns the log text.
std::string converse(Transport& transport, const TimeSource& time) {
  EventLog log;
  BranchLink link(transport, time, &log);
  ControllerConfig cfg;
  cfg.clocks_per_epoch = [](BranchId) { return std::int64_t{50}; };
  TuningController controller(link, cfg);
  Searcher searcher(SearchSpace({TunableSpec::log("lr", 1e-3, 0.1)}), SearchAlgorithm::kTpe, 3);
  auto out = controller.initial_tuning(kRootBranch, searcher);
  controller.run_until_plateau(out.best_branch, {3, false, 0.0, std::nullopt, 5});
  return log.text();
}

}  // namespace

TEST_CASE("records survive a socket unchanged") {
  int fds[2];
  REQUIRE(socketpair(AF_UNIX, SOCK_STREAM, 0, fds) == 0);
  sim::SimTrainer remote(quadratic(), trainer_cfg());
  std::thread server([&] {
    serve_fd(fds[1], remote);
    close(fds[1]);
  });
  FdTransport transport(fds[0]);
  const std::string over_socket = converse(transport, remote);
  shutdown(fds[0], SHUT_WR);
  server.join();
  close(fds[0]);

  sim::SimTrainer local(quadratic(), trainer_cfg());
  InProcessTransport direct(local);
  CHECK(converse(direct, local) == over_socket);

  sim::SimTrainer coded(quadratic(), trainer_cfg());
  RecordTransport records(coded, {"lr"});
  CHECK(converse(records, coded) == over_socket);
  CHECK(records.bytes_sent() > 0);
  CHECK(records.bytes_received() > 0);
}

TEST_CASE("framing across partial reads") {
  int fds[2];
  REQUIRE(socketpair(AF_UNIX, SOCK_STREAM, 0, fds) == 0);
  const std::string a = protocol::encode_message(protocol::ScheduleBranch{ClockValue{1}, BranchId{2}});
  const std::string b = protocol::encode_message(protocol::ReportProgress{ClockValue{1}, 0.25});
  const std::string both = a + b;
  std::thread writer([&] {
    for (char c : both) write_all(fds[1], std::string(1, c));
    close(fds[1]);
  });
  std::string buffer, line;
  REQUIRE(read_record(fds[0], buffer, line));
  CHECK(protocol::decode_message(line) == protocol::decode_message(a));
  REQUIRE(read_record(fds[0], buffer, line));
  CHECK(std::get<protocol::ReportProgress>(protocol::decode_message(line)).progress == 0.25);
  CHECK_FALSE(read_record(fds[0], buffer, line));
  writer.join();
  close(fds[0]);
}

TEST_CASE("closed peer is an i/o error") {
  int fds[2];
  REQUIRE(socketpair(AF_UNIX, SOCK_STREAM, 0, fds) == 0);
  close(fds[1]);
  FdTransport transport(fds[0]);
  try {
    transport.receive();
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kIo);
  }
  close(fds[0]);
}
