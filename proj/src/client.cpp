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

#include "vulnscan/client.hpp"

#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "vulnscan/net.hpp"

namespace vulnscan {

std::string_view to_string(ExitStatus status) noexcept {
  switch (status) {
    case ExitStatus::Ok: return "ok";
    case ExitStatus::Usage: return "usage";
    case ExitStatus::Rejected: return "rejected";
    case ExitStatus::Mitm: return "mitm";
    case ExitStatus::Timeout: return "timeout";
    case ExitStatus::PollLimit: return "poll-limit";
    case ExitStatus::Transport: return "transport";
    case ExitStatus::Threshold: return "threshold";
    case ExitStatus::Protocol: return "protocol";
  }
  return "unknown";
}

void ClientConfig::validate() const {
  if (client_id.empty()) throw std::invalid_argument("client id must not be empty");
  if (secret.empty()) throw std::invalid_argument("secret must not be empty");
  if (poll_interval < std::chrono::seconds(1)) throw std::invalid_argument("poll interval must be at least 1 s");
  if (max_wait < poll_interval) throw std::invalid_argument("max wait must be at least one poll interval");
}

TcpTransport::TcpTransport(std::string host, std::uint16_t port, std::chrono::milliseconds timeout,
                           unsigned retries, std::chrono::milliseconds retry_delay)
    : host_(std::move(host)), port_(port), timeout_(timeout), retries_(retries), retry_delay_(retry_delay) {}

Bytes TcpTransport::exchange(const Bytes& frame) {
  std::string last_error;
  for (unsigned attempt = 0; attempt <= retries_; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(retry_delay_);
    try {
      auto socket = net::connect_tcp(host_, port_, timeout_);
      if (!net::write_all(socket, frame)) throw net::TransportError("send failed");
      auto reply = net::read_frame(socket);
      if (!reply) throw net::TransportError("connection closed without a reply");
      return *reply;
    } catch (const net::TransportError& e) {
      last_error = e.what();
      spdlog::warn("attempt {} of {}: {}", attempt + 1, retries_ + 1, last_error);
    }
  }
  throw net::TransportError(last_error);
}

ScanClient::ScanClient(ClientConfig config, Transport& transport, Clock clock, Sleeper sleeper)
    : config_(std::move(config)),
      transport_(transport),
      clock_(std::move(clock)),
      sleeper_(std::move(sleeper)) {
  config_.validate();
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  cred_ = make_credential(config_.client_id, as_bytes(config_.secret), config_.salt);
  cred_.sent_sn = initial_sequence_number();
}

OpenedMessage ScanClient::exchange(const MessageBody& body) {
  auto request = seal_message(cred_, body, cred_.next_send_sn(), clock_());
  auto reply = transport_.exchange(encode_frame(request));
  return open_message(decode_frame(reply), cred_, clock_());
}

SubmitOutcome ScanClient::submit(const Inventory& inventory) {
  OpenedMessage reply;
  try {
    reply = exchange(ScanRequestBody{inventory});
  } catch (const net::TransportError& e) {
    return {ExitStatus::Transport, {}, e.what()};
  } catch (const std::exception& e) {
    return {ExitStatus::Protocol, {}, e.what()};
  }

  if (auto* accept = std::get_if<ScanAcceptBody>(&reply.body)) {
    if (!client_check_echo(config_.client_id, *accept)) {
      spdlog::error("server echoed client id '{}' instead of '{}'; discarding token",
                    accept->echo_client_id_a, config_.client_id);
      return {ExitStatus::Mitm, {}, "echoed client id does not match"};
    }
    return {ExitStatus::Ok, accept->token, {}};
  }
  if (auto* reject = std::get_if<ScanRejectBody>(&reply.body)) return {ExitStatus::Rejected, {}, reject->reason};
  if (auto* error = std::get_if<ProtocolErrorBody>(&reply.body)) return {ExitStatus::Protocol, {}, error->code};
  return {ExitStatus::Protocol, {}, "unexpected reply"};
}

PollOutcome ScanClient::poll(const std::string& token) {
  PollOutcome outcome;
  std::chrono::milliseconds waited{0};
  while (true) {
    OpenedMessage reply;
    ++outcome.polls;
    try {
      reply = exchange(ResultRequestBody{token});
    } catch (const net::TransportError& e) {
      outcome.status = ExitStatus::Transport;
      outcome.message = e.what();
      return outcome;
    } catch (const std::exception& e) {
      outcome.status = ExitStatus::Protocol;
      outcome.message = e.what();
      return outcome;
    }

    if (auto* response = std::get_if<ResultResponseBody>(&reply.body)) {
      try {
        outcome.report = report_from_json(response->report);
      } catch (const std::exception& e) {
        outcome.status = ExitStatus::Protocol;
        outcome.message = e.what();
      }
      return outcome;
    }
    if (auto* reject = std::get_if<ScanRejectBody>(&reply.body)) {
      outcome.status = reject->reason == "poll-limit" ? ExitStatus::PollLimit : ExitStatus::Rejected;
      outcome.message = reject->reason;
      return outcome;
    }
    if (auto* error = std::get_if<ProtocolErrorBody>(&reply.body)) {
      outcome.status = ExitStatus::Protocol;
      outcome.message = error->code;
      return outcome;
    }
    if (!std::holds_alternative<ResultNotReadyBody>(reply.body)) {
      outcome.status = ExitStatus::Protocol;
      outcome.message = "unexpected reply";
      return outcome;
    }
    if (waited + config_.poll_interval > config_.max_wait) {
      outcome.status = ExitStatus::Timeout;
      outcome.message = "no result within the maximum wait";
      return outcome;
    }
    sleeper_(config_.poll_interval);
    waited += config_.poll_interval;
  }
}

namespace {

std::string format_score(std::optional<double> score) {
  if (!score) return "n/a";
  std::ostringstream s;
  s << std::fixed << std::setprecision(1) << *score;
  return s.str();
}

}  // namespace

ExitStatus render_report(const ScanReport& report, ReportFormat format, std::optional<double> fail_on,
                         std::ostream& out) {
  if (format == ReportFormat::Json) {
    out << report_to_json(report).dump(2) << '\n';
  } else {
    for (const auto& r : report.results) {
      std::optional<double> worst;
      bool exploit = false;
      for (const auto& id : r.cve_ids) {
        auto it = report.cves.find(id);
        if (it == report.cves.end()) continue;
        if (it->second.cvss && (!worst || *it->second.cvss > *worst)) worst = it->second.cvss;
        exploit = exploit || it->second.exploit;
      }
      out << r.pvc.name;
      if (const auto& v = r.pvc.display_version ? r.pvc.display_version : r.pvc.version) out << ' ' << *v;
      if (r.error) {
        out << ": error: " << *r.error << '\n';
        continue;
      }
      out << ": " << r.cve_ids.size() << " CVEs, worst CVSS " << format_score(worst)
          << (exploit ? ", exploit available" : "") << '\n';
    }
    auto summary = report.summary();
    out << summary.total_cves << " vulnerabilities";
    if (summary.total_cves > 0) {
      out << " (" << summary.exploitable << " with known exploits, max CVSS "
          << format_score(summary.max_cvss) << ")";
    }
    out << '\n';
  }

  if (fail_on) {
    for (const auto& [id, detail] : report.cves) {
      if (detail.cvss && *detail.cvss >= *fail_on) return ExitStatus::Threshold;
    }
  }
  return ExitStatus::Ok;
}

}  // namespace vulnscan
