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

#include "branchtune/transport.hpp"

#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace branchtune {

void InProcessTransport::send(const protocol::Message& msg) {
  if (auto reply = endpoint_.handle(msg)) inbox_.emplace_back(*reply);
}

protocol::Message InProcessTransport::receive() {
  if (inbox_.empty()) throw Error(ErrorCode::kIo, "receive on empty in-process channel");
  protocol::Message msg = std::move(inbox_.front());
  inbox_.pop_front();
  return msg;
}

void RecordTransport::send(const protocol::Message& msg) {
  const std::string record = protocol::encode_message(msg);
  bytes_sent_ += record.size();
  auto decoded = protocol::decode_message(record, known_.empty() ? nullptr : &known_);
  if (auto reply = endpoint_.handle(decoded)) inbox_.push_back(protocol::encode_message(*reply));
}

protocol::Message RecordTransport::receive() {
  if (inbox_.empty()) throw Error(ErrorCode::kIo, "receive on empty record channel");
  std::string record = std::move(inbox_.front());
  inbox_.pop_front();
  bytes_received_ += record.size();
  return protocol::decode_message(record);
}

void write_all(int fd, const std::string& bytes) {
  std::size_t done = 0;
  while (done < bytes.size()) {
    ssize_t n = ::write(fd, bytes.data() + done, bytes.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::kIo, std::string("write failed: ") + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
}

bool read_record(int fd, std::string& buffer, std::string& line) {
  for (;;) {
    auto nl = buffer.find('\n');
    if (nl != std::string::npos) {
      line = buffer.substr(0, nl + 1);
      buffer.erase(0, nl + 1);
      return true;
    }
    char chunk[4096];
    ssize_t n = ::read(fd, chunk, sizeof(chunk));
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::kIo, std::string("read failed: ") + std::strerror(errno));
    }
    if (n == 0) {
      if (!buffer.empty()) throw Error(ErrorCode::kMalformedRecord, "truncated record at EOF");
      return false;
    }
    buffer.append(chunk, static_cast<std::size_t>(n));
  }
}

void FdTransport::send(const protocol::Message& msg) { write_all(fd_, protocol::encode_message(msg)); }

protocol::Message FdTransport::receive() {
  std::string line;
  if (!read_record(fd_, buffer_, line)) throw Error(ErrorCode::kIo, "trainer closed the connection");
  return protocol::decode_message(line);
}

void serve_fd(int fd, TrainerEndpoint& endpoint) {
  std::string buffer;
  std::string line;
  while (read_record(fd, buffer, line)) {
    auto reply = endpoint.handle(protocol::decode_message(line));
    if (reply) write_all(fd, protocol::encode_message(*reply));
  }
}

}  // namespace branchtune
