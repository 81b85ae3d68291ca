// Copyright 2026 The vulnscan Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "vulnscan/crypto.hpp"

namespace vulnscan::net {

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Owning file descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) noexcept : fd_(fd) {}
  Socket(Socket&& other) noexcept : fd_(other.release()) {}
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket();

  int get() const noexcept { return fd_; }
  int release() noexcept;
  explicit operator bool() const noexcept { return fd_ >= 0; }

 private:
  int fd_ = -1;
};

/// Connects with a timeout; the socket gets the same send/receive timeout.
Socket connect_tcp(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout);

/// Binds and listens on host:port (port 0 picks a free port).
Socket listen_tcp(const std::string& host, std::uint16_t port, int backlog = 256);
std::uint16_t local_port(const Socket& socket);

void set_io_timeout(const Socket& socket, std::chrono::milliseconds timeout);

bool write_all(const Socket& socket, std::span<const std::uint8_t> data);
/// One length-prefixed frame; nullopt on EOF, timeout, oversize or error.
std::optional<Bytes> read_frame(const Socket& socket);

/// "host:port" -> parts. Throws std::invalid_argument.
std::pair<std::string, std::uint16_t> split_host_port(const std::string& address);

}  // namespace vulnscan::net
