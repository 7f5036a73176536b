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

#include <cstddef>
#include <deque>
#include <optional>
#include <set>
#include <string>

#include "branchtune/protocol.hpp"

namespace branchtune {

/// Trainer side of the conversation. Returns the progress report for a
/// ScheduleBranch and nothing for the other messages.
class TrainerEndpoint {
 public:
  virtual ~TrainerEndpoint() = default;
  virtual std::optional<protocol::ReportProgress> handle(const protocol::Message& msg) = 0;
};

/// Monotonic seconds as seen by the tuner. Simulated backends advance it.
class TimeSource {
 public:
  virtual ~TimeSource() = default;
  virtual double now() const = 0;
};

/// Tuner side of the conversation. Delivery is in order.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(const protocol::Message& msg) = 0;
  /// Blocks for the next trainer message. Throws Error(kIo) when closed.
  virtual protocol::Message receive() = 0;
};

/// Direct dispatch into an endpoint living in the same process.
class InProcessTransport final : public Transport {
 public:
  explicit InProcessTransport(TrainerEndpoint& endpoint) : endpoint_(endpoint) {}
  void send(const protocol::Message& msg) override;
  protocol::Message receive() override;

 private:
  TrainerEndpoint& endpoint_;
  std::deque<protocol::Message> inbox_;
};

/// Same process, but every message crosses the wire codec in both
/// directions, so the byte format is exercised exactly as on a socket.
class RecordTransport final : public Transport {
 public:
  explicit RecordTransport(TrainerEndpoint& endpoint, std::set<std::string> known_tunables = {})
      : endpoint_(endpoint), known_(std::move(known_tunables)) {}
  void send(const protocol::Message& msg) override;
  protocol::Message receive() override;
  std::size_t bytes_sent() const { return bytes_sent_; }
  std::size_t bytes_received() const { return bytes_received_; }

 private:
  TrainerEndpoint& endpoint_;
  std::set<std::string> known_;
  std::deque<std::string> inbox_;
  std::size_t bytes_sent_ = 0;
  std::size_t bytes_received_ = 0;
};

/// Newline-framed records over a stream file descriptor (pipe or socket).
/// Does not own the descriptor.
class FdTransport final : public Transport {
 public:
  explicit FdTransport(int fd) : fd_(fd) {}
  void send(const protocol::Message& msg) override;
  protocol::Message receive() override;

 private:
  int fd_;
  std::string buffer_;
};

/// Reads one record from `fd` into `line` using `buffer` for carry-over.
/// Returns false on clean EOF.
bool read_record(int fd, std::string& buffer, std::string& line);
void write_all(int fd, const std::string& bytes);

/// Trainer-side loop: decodes records from `fd`, dispatches to `endpoint`,
/// writes replies. Returns when the peer closes.
void serve_fd(int fd, TrainerEndpoint& endpoint);

}  // namespace branchtune
