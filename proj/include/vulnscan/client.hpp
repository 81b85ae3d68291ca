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
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

#include "vulnscan/protocol.hpp"
#include "vulnscan/pvc.hpp"
#include "vulnscan/scan_engine.hpp"

namespace vulnscan {

/// Process exit codes of the client tool.
enum class ExitStatus : int {
  Ok = 0,
  Usage = 1,
  Rejected = 2,
  Mitm = 3,
  Timeout = 4,
  PollLimit = 5,
  Transport = 6,
  Threshold = 7,
  Protocol = 8,
};

std::string_view to_string(ExitStatus status) noexcept;

struct ClientConfig {
  std::string server;  // HOST:PORT
  std::string client_id;
  std::string secret;
  Salt128 salt{};
  std::chrono::milliseconds poll_interval{5000};
  std::chrono::milliseconds max_wait{300000};
  std::chrono::milliseconds connect_timeout{5000};
  unsigned retries = 3;

  /// Throws std::invalid_argument.
  void validate() const;
};

/// Sends one frame, returns the peer's one-frame answer.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual Bytes exchange(const Bytes& frame) = 0;
};

/// One TCP connection per exchange, retried on transport failure.
class TcpTransport : public Transport {
 public:
  TcpTransport(std::string host, std::uint16_t port, std::chrono::milliseconds timeout,
               unsigned retries, std::chrono::milliseconds retry_delay = std::chrono::milliseconds(200));
  Bytes exchange(const Bytes& frame) override;

 private:
  std::string host_;
  std::uint16_t port_;
  std::chrono::milliseconds timeout_;
  unsigned retries_;
  std::chrono::milliseconds retry_delay_;
};

struct SubmitOutcome {
  ExitStatus status = ExitStatus::Ok;
  std::string token;    // empty unless Ok
  std::string message;  // reject reason or error text
};

struct PollOutcome {
  ExitStatus status = ExitStatus::Ok;
  std::optional<ScanReport> report;
  std::size_t polls = 0;
  std::string message;
};

class ScanClient {
 public:
  using Clock = std::function<UnixSeconds()>;
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  ScanClient(ClientConfig config, Transport& transport, Clock clock = unix_now, Sleeper sleeper = {});

  /// Sends the inventory and verifies the echoed client id.
  SubmitOutcome submit(const Inventory& inventory);
  /// Polls until a report, a reject, or max_wait.
  PollOutcome poll(const std::string& token);

  const ClientCredential& credential() const noexcept { return cred_; }

 private:
  OpenedMessage exchange(const MessageBody& body);

  ClientConfig config_;
  Transport& transport_;
  Clock clock_;
  Sleeper sleeper_;
  ClientCredential cred_;
};

enum class ReportFormat { Text, Json };

/// Writes the report; Threshold when some CVE scores at or above fail_on.
ExitStatus render_report(const ScanReport& report, ReportFormat format, std::optional<double> fail_on,
                         std::ostream& out);

}  // namespace vulnscan
