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

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <variant>
#include <vector>

#include "vulnscan/firewall.hpp"
#include "vulnscan/net.hpp"
#include "vulnscan/protocol.hpp"
#include "vulnscan/scan_engine.hpp"
#include "vulnscan/vuln_db.hpp"

namespace vulnscan {

struct ServerConfig {
  std::string bind_address = "0.0.0.0";
  std::uint16_t port = 7878;
  std::string db_path = "vulnscan.db";
  std::string credentials_path = "credentials.json";
  std::chrono::seconds freshness_window = kDefaultFreshnessWindow;
  std::size_t worker_count = 2;
  std::size_t pvc_concurrency_cap = 8;
  std::size_t queue_capacity = 1024;
  std::size_t max_polls_per_token = 100;
  std::uint32_t block_base_seconds = 2;
  std::size_t connection_threads = 16;
  std::chrono::seconds result_ttl{3600};
  std::vector<FirewallRule> firewall;  // empty: deny everything

  /// Throws std::invalid_argument if any cap is zero.
  void validate() const;
};

ServerConfig server_config_from_json(const nlohmann::json& document);
ServerConfig load_server_config(const std::filesystem::path& path);

/// Server-side credential table. Each client's record is serialized behind
/// its own mutex; the table itself is read-mostly.
class CredentialStore {
 public:
  struct Provisioned {
    std::string client_id;
    std::string secret;
    Salt128 salt{};
  };

  /// Adds every record in the file. A missing file adds nothing.
  void load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  /// Generates a random secret and salt, stores only the derived key.
  Provisioned provision(const std::string& client_id);
  void add(ClientCredential credential);
  bool contains(std::string_view client_id) const;
  std::size_t size() const;

  /// Runs fn(ClientCredential&) under the client's lock. False if unknown.
  template <typename Fn>
  bool with_credential(std::string_view client_id, Fn&& fn) {
    std::shared_lock table(mutex_);
    auto it = slots_.find(std::string(client_id));
    if (it == slots_.end()) return false;
    std::lock_guard lock(it->second->mutex);
    fn(it->second->credential);
    return true;
  }

 private:
  struct Slot {
    std::mutex mutex;
    ClientCredential credential;
  };
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::unique_ptr<Slot>, std::less<>> slots_;
};

struct RateDecision {
  bool blocked = false;
  UnixSeconds until{};
};

/// Exponential blocking: the k-th violation blocks until now + base^k
/// seconds (saturating). Requests while blocked change nothing.
RateDecision apply_rate_limit(BlockState& state, bool violation, UnixSeconds now,
                              std::uint32_t base_seconds);

enum class JobState { Queued, Running, Done, Failed };
std::string_view to_string(JobState state) noexcept;

struct ScanJob {
  std::string token;
  std::string client_id;
  Inventory inventory;
  JobState state = JobState::Queued;
  std::chrono::steady_clock::time_point enqueued_at;
  std::chrono::steady_clock::time_point finished_at;
  std::size_t polls_used = 0;
  /// Position in completion order, starting at 1.
  std::uint64_t completion_index = 0;
  std::optional<ScanReport> report;
  std::string error;
};

/// Files ingested by one update.
struct UpdateSources {
  std::vector<std::filesystem::path> nvd_feeds;
  std::vector<std::filesystem::path> cpe_dictionaries;
  std::vector<std::filesystem::path> exploit_maps;
};

/// *.json feeds, *.txt dictionaries, *.csv exploit maps, sorted by name.
UpdateSources discover_update_sources(const std::filesystem::path& directory);

/// Everything behind the socket: verification, queueing, workers, results.
class ScanService {
 public:
  using Clock = std::function<UnixSeconds()>;

  ScanService(ServerConfig config, VulnDb& db, CredentialStore& credentials, Clock clock = unix_now);
  ~ScanService();
  ScanService(const ScanService&) = delete;
  ScanService& operator=(const ScanService&) = delete;

  void start();
  void stop();

  const ServerConfig& config() const noexcept { return config_; }
  VulnDb& db() noexcept { return db_; }

  /// Token on success, ScanRejectBody("busy") when the queue is full.
  std::variant<std::string, ScanRejectBody> enqueue_job(Inventory inventory, std::string client_id);

  struct FetchOutcome {
    std::variant<ResultResponseBody, ResultNotReadyBody, ScanRejectBody> response;
    bool violation = false;
  };
  FetchOutcome fetch_result(const std::string& token, std::string_view client_id);

  RateDecision apply_rate_limit(std::string_view client_id, bool violation);

  struct FrameOutcome {
    std::optional<Bytes> response;  // nullopt: drop silently
    bool close = true;
  };
  FrameOutcome handle_frame(std::span<const std::uint8_t> frame, std::string_view source_ip);

  /// Ingests all sources in one transaction and bumps the generation.
  /// On any failure nothing changes and the exception propagates.
  std::uint64_t run_update(const UpdateSources& sources);

  std::optional<ScanJob> job(const std::string& token) const;
  /// Blocks until the job is Done/Failed or the timeout passes.
  bool wait_for(const std::string& token, std::chrono::milliseconds timeout) const;
  std::size_t queued() const;

 private:
  void worker_loop();
  void purge_expired_locked();
  Bytes seal_response(ClientCredential& cred, const MessageBody& body);

  ServerConfig config_;
  VulnDb& db_;
  CredentialStore& credentials_;
  Clock clock_;
  ScanEngine engine_;

  mutable std::mutex jobs_mutex_;
  mutable std::condition_variable jobs_cv_;
  std::unordered_map<std::string, std::shared_ptr<ScanJob>> jobs_;
  std::deque<std::shared_ptr<ScanJob>> queue_;
  std::uint64_t completed_ = 0;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
};

/// Accepts TCP connections and feeds frames to a ScanService.
class TcpServer {
 public:
  TcpServer(ScanService& service, std::string bind_address, std::uint16_t port,
            std::size_t connection_threads = 16);
  ~TcpServer();
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  void start();
  void stop();
  std::uint16_t port() const noexcept { return bound_port_; }

 private:
  void accept_loop();
  void connection_loop();
  void serve(net::Socket socket, const std::string& peer);

  ScanService& service_;
  std::string bind_address_;
  std::uint16_t requested_port_;
  std::uint16_t bound_port_ = 0;
  std::size_t connection_threads_;
  net::Socket listener_;
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  std::vector<std::thread> handlers_;
  std::mutex pending_mutex_;
  std::condition_variable pending_cv_;
  std::deque<std::pair<net::Socket, std::string>> pending_;
};

}  // namespace vulnscan
