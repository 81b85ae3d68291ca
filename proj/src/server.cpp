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

#include "vulnscan/server.hpp"

#include <poll.h>
#include <sys/socket.h>
#include <netinet/in.h>
#include <arpa/inet.h>

#include <algorithm>
#include <fstream>

#include <spdlog/spdlog.h>

namespace vulnscan {

using json = nlohmann::json;

namespace {

constexpr std::uint64_t kMaxBlockSeconds = 365ull * 24 * 3600;

std::string new_token() { return to_hex(random_array<16>()); }

template <typename T>
void read_opt(const json& doc, const char* key, T& out) {
  if (auto it = doc.find(key); it != doc.end() && !it->is_null()) out = it->get<T>();
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void ServerConfig::validate() const {
  const auto positive = [](std::size_t v, const char* name) {
    if (v < 1) throw std::invalid_argument(std::string(name) + " must be at least 1");
  };
  positive(worker_count, "worker_count");
  positive(pvc_concurrency_cap, "pvc_concurrency_cap");
  positive(queue_capacity, "queue_capacity");
  positive(max_polls_per_token, "max_polls_per_token");
  positive(block_base_seconds, "block_base_seconds");
  positive(connection_threads, "connection_threads");
  if (freshness_window.count() < 0) throw std::invalid_argument("freshness window must not be negative");
}

ServerConfig server_config_from_json(const json& doc) {
  ServerConfig c;
  read_opt(doc, "bind_address", c.bind_address);
  read_opt(doc, "port", c.port);
  read_opt(doc, "db_path", c.db_path);
  read_opt(doc, "credentials_path", c.credentials_path);
  if (auto it = doc.find("freshness_window_seconds"); it != doc.end()) {
    c.freshness_window = std::chrono::seconds(it->get<std::int64_t>());
  }
  read_opt(doc, "worker_count", c.worker_count);
  read_opt(doc, "pvc_concurrency_cap", c.pvc_concurrency_cap);
  read_opt(doc, "queue_capacity", c.queue_capacity);
  read_opt(doc, "max_polls_per_token", c.max_polls_per_token);
  read_opt(doc, "block_base_seconds", c.block_base_seconds);
  read_opt(doc, "connection_threads", c.connection_threads);
  if (auto it = doc.find("result_ttl_seconds"); it != doc.end()) {
    c.result_ttl = std::chrono::seconds(it->get<std::int64_t>());
  }
  if (auto it = doc.find("firewall"); it != doc.end()) {
    for (const auto& rule : *it) c.firewall.push_back(firewall_rule_from_json(rule));
  }
  c.validate();
  return c;
}

ServerConfig load_server_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path.string() + "'");
  auto config = server_config_from_json(json::parse(in));
  // Relative paths are relative to the config file.
  auto base = path.parent_path();
  for (auto* p : {&config.db_path, &config.credentials_path}) {
    if (*p != ":memory:" && std::filesystem::path(*p).is_relative()) *p = (base / *p).string();
  }
  return config;
}

// ---------------------------------------------------------------------------
// Credentials

void CredentialStore::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return;
  auto doc = json::parse(in);
  for (const auto& entry : doc.at("clients")) {
    ClientCredential cred;
    cred.client_id = entry.at("id").get<std::string>();
    auto salt = from_hex(entry.at("salt").get<std::string>());
    auto key = from_hex(entry.at("key").get<std::string>());
    if (salt.size() != cred.salt.size() || key.size() != cred.key.size()) {
      throw std::runtime_error("credential for '" + cred.client_id + "' has a bad salt or key length");
    }
    std::copy(salt.begin(), salt.end(), cred.salt.begin());
    std::copy(key.begin(), key.end(), cred.key.begin());
    add(std::move(cred));
  }
}

void CredentialStore::save(const std::filesystem::path& path) const {
  json clients = json::array();
  {
    std::shared_lock table(mutex_);
    for (const auto& [id, slot] : slots_) {
      std::lock_guard lock(slot->mutex);
      clients.push_back({{"id", id},
                         {"salt", to_hex(slot->credential.salt)},
                         {"key", to_hex(slot->credential.key)}});
    }
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << json{{"clients", std::move(clients)}}.dump(2) << '\n';
  }
  std::filesystem::permissions(tmp, std::filesystem::perms::owner_read | std::filesystem::perms::owner_write);
  std::filesystem::rename(tmp, path);
}

CredentialStore::Provisioned CredentialStore::provision(const std::string& client_id) {
  if (client_id.empty()) throw std::invalid_argument("client id must not be empty");
  Provisioned p;
  p.client_id = client_id;
  p.secret = to_hex(random_array<24>());
  p.salt = random_array<kSaltSize>();
  add(make_credential(client_id, as_bytes(p.secret), p.salt));
  return p;
}

void CredentialStore::add(ClientCredential credential) {
  credential.sent_sn = std::max(credential.sent_sn, initial_sequence_number());
  std::unique_lock table(mutex_);
  auto slot = std::make_unique<Slot>();
  slot->credential = std::move(credential);
  auto id = slot->credential.client_id;
  slots_[id] = std::move(slot);
}

bool CredentialStore::contains(std::string_view client_id) const {
  std::shared_lock table(mutex_);
  return slots_.find(client_id) != slots_.end();
}

std::size_t CredentialStore::size() const {
  std::shared_lock table(mutex_);
  return slots_.size();
}

// ---------------------------------------------------------------------------
// Rate limiting

RateDecision apply_rate_limit(BlockState& state, bool violation, UnixSeconds now,
                              std::uint32_t base_seconds) {
  if (now < state.blocked_until) return {true, state.blocked_until};
  if (!violation) return {false, {}};

  ++state.violations;
  std::uint64_t seconds = 1;
  for (std::uint32_t i = 0; i < state.violations && seconds < kMaxBlockSeconds; ++i) {
    seconds *= std::max<std::uint32_t>(base_seconds, 1);
  }
  seconds = std::min(seconds, kMaxBlockSeconds);
  state.blocked_until = now + std::chrono::seconds(seconds);
  return {true, state.blocked_until};
}

std::string_view to_string(JobState state) noexcept {
  switch (state) {
    case JobState::Queued: return "queued";
    case JobState::Running: return "running";
    case JobState::Done: return "done";
    case JobState::Failed: return "failed";
  }
  return "unknown";
}

UpdateSources discover_update_sources(const std::filesystem::path& directory) {
  if (!std::filesystem::is_directory(directory)) {
    throw IngestError("feeds directory '" + directory.string() + "' does not exist");
  }
  UpdateSources sources;
  for (const auto& entry : std::filesystem::directory_iterator(directory)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    if (ext == ".json") sources.nvd_feeds.push_back(entry.path());
    else if (ext == ".txt") sources.cpe_dictionaries.push_back(entry.path());
    else if (ext == ".csv") sources.exploit_maps.push_back(entry.path());
  }
  for (auto* list : {&sources.nvd_feeds, &sources.cpe_dictionaries, &sources.exploit_maps}) {
    std::sort(list->begin(), list->end());
  }
  return sources;
}

// ---------------------------------------------------------------------------
// ScanService

ScanService::ScanService(ServerConfig config, VulnDb& db, CredentialStore& credentials, Clock clock)
    : config_(std::move(config)),
      db_(db),
      credentials_(credentials),
      clock_(std::move(clock)),
      engine_(db, config_.pvc_concurrency_cap) {
  config_.validate();
}

ScanService::~ScanService() { stop(); }

void ScanService::start() {
  std::lock_guard lock(jobs_mutex_);
  if (!workers_.empty()) return;
  stopping_ = false;
  for (std::size_t i = 0; i < config_.worker_count; ++i) workers_.emplace_back([this] { worker_loop(); });
}

void ScanService::stop() {
  {
    std::lock_guard lock(jobs_mutex_);
    stopping_ = true;
  }
  jobs_cv_.notify_all();
  for (auto& t : workers_) {
    if (t.joinable()) t.join();
  }
  workers_.clear();
}

void ScanService::worker_loop() {
  while (true) {
    std::shared_ptr<ScanJob> job;
    {
      std::unique_lock lock(jobs_mutex_);
      jobs_cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      job = std::move(queue_.front());
      queue_.pop_front();
      job->state = JobState::Running;
    }

    std::optional<ScanReport> report;
    std::string error;
    try {
      db_.refresh();
      report = engine_.execute_job(job->token, job->inventory);
    } catch (const std::exception& e) {
      error = e.what();
      spdlog::error("job {} failed: {}", job->token, error);
    }

    {
      std::lock_guard lock(jobs_mutex_);
      job->state = report ? JobState::Done : JobState::Failed;
      job->report = std::move(report);
      job->error = std::move(error);
      job->finished_at = std::chrono::steady_clock::now();
      job->completion_index = ++completed_;
    }
    jobs_cv_.notify_all();
  }
}

void ScanService::purge_expired_locked() {
  const auto cutoff = std::chrono::steady_clock::now() - config_.result_ttl;
  std::erase_if(jobs_, [&](const auto& item) {
    const auto& job = *item.second;
    return (job.state == JobState::Done || job.state == JobState::Failed) && job.finished_at < cutoff;
  });
}

std::variant<std::string, ScanRejectBody> ScanService::enqueue_job(Inventory inventory,
                                                                   std::string client_id) {
  auto job = std::make_shared<ScanJob>();
  job->client_id = std::move(client_id);
  job->inventory = std::move(inventory);
  job->enqueued_at = std::chrono::steady_clock::now();
  {
    std::lock_guard lock(jobs_mutex_);
    purge_expired_locked();
    if (queue_.size() >= config_.queue_capacity) return ScanRejectBody{"busy"};
    do {
      job->token = new_token();
    } while (jobs_.contains(job->token));
    jobs_.emplace(job->token, job);
    queue_.push_back(job);
  }
  jobs_cv_.notify_all();
  spdlog::info("job {} queued for '{}' ({} PVCs)", job->token, job->client_id, job->inventory.pvcs.size());
  return job->token;
}

ScanService::FetchOutcome ScanService::fetch_result(const std::string& token,
                                                    std::string_view client_id) {
  std::lock_guard lock(jobs_mutex_);
  auto it = jobs_.find(token);
  if (it == jobs_.end()) return {ScanRejectBody{"unknown-token"}, false};
  auto& job = *it->second;
  if (job.client_id != client_id) {
    spdlog::warn("impersonation: '{}' polled a token issued to '{}'", client_id, job.client_id);
    return {ScanRejectBody{"impersonation"}, true};
  }
  if (++job.polls_used > config_.max_polls_per_token) {
    return {ScanRejectBody{"poll-limit"}, true};
  }
  switch (job.state) {
    case JobState::Done: return {ResultResponseBody{report_to_json(*job.report)}, false};
    case JobState::Failed: return {ScanRejectBody{"scan-failed: " + job.error}, false};
    default: return {ResultNotReadyBody{}, false};
  }
}

RateDecision ScanService::apply_rate_limit(std::string_view client_id, bool violation) {
  RateDecision decision;
  credentials_.with_credential(client_id, [&](ClientCredential& cred) {
    decision = vulnscan::apply_rate_limit(cred.block, violation, clock_(), config_.block_base_seconds);
  });
  return decision;
}

Bytes ScanService::seal_response(ClientCredential& cred, const MessageBody& body) {
  return encode_frame(seal_message(cred, body, cred.next_send_sn(), clock_()));
}

ScanService::FrameOutcome ScanService::handle_frame(std::span<const std::uint8_t> frame,
                                                    std::string_view source_ip) {
  Envelope envelope;
  try {
    envelope = decode_frame(frame);
  } catch (const FrameError& e) {
    spdlog::debug("dropping undecodable frame from {}: {}", source_ip, e.what());
    return {};
  }

  FrameOutcome outcome;
  const bool known = credentials_.with_credential(envelope.client_id_a, [&](ClientCredential& cred) {
    const auto now = clock_();
    OpenedMessage message;
    try {
      message = open_message(envelope, cred, now, config_.freshness_window);
    } catch (const OpenError& e) {
      if (!e.attributable()) return;  // drop
      // Replays and stale copies may come from a third party; only errors the
      // key holder must have produced count against the client.
      const bool violation =
          e.code() == OpenErrorCode::Impersonation || e.code() == OpenErrorCode::Malformed;
      if (violation) {
        vulnscan::apply_rate_limit(cred.block, true, now, config_.block_base_seconds);
      }
      outcome.response = seal_response(cred, ProtocolErrorBody{std::string(to_string(e.code()))});
      return;
    }

    if (vulnscan::apply_rate_limit(cred.block, false, now, config_.block_base_seconds).blocked) {
      outcome.response = seal_response(cred, ProtocolErrorBody{"blocked"});
      return;
    }

    auto verdict = verify_request(source_ip, cred.client_id, true, config_.firewall);
    if (!verdict.accepted) {
      spdlog::info("firewall rejected '{}' from {}: {}", cred.client_id, source_ip, verdict.reason);
      outcome.response = seal_response(cred, ScanRejectBody{verdict.reason});
      return;
    }

    switch (message.type) {
      case MessageType::ScanRequest: {
        auto& request = std::get<ScanRequestBody>(message.body);
        auto queued = enqueue_job(std::move(request.rsd), cred.client_id);
        if (auto* token = std::get_if<std::string>(&queued)) {
          outcome.response = seal_response(cred, ScanAcceptBody{*token, envelope.client_id_a});
        } else {
          outcome.response = seal_response(cred, std::get<ScanRejectBody>(queued));
        }
        outcome.close = true;
        return;
      }
      case MessageType::ResultRequest: {
        const auto& request = std::get<ResultRequestBody>(message.body);
        auto fetched = fetch_result(request.token, cred.client_id);
        if (fetched.violation) {
          vulnscan::apply_rate_limit(cred.block, true, now, config_.block_base_seconds);
        }
        outcome.response =
            std::visit([&](auto& body) { return seal_response(cred, MessageBody(std::move(body))); },
                       fetched.response);
        outcome.close = false;
        return;
      }
      default:
        outcome.response = seal_response(cred, ProtocolErrorBody{"unexpected-message"});
        return;
    }
  });
  if (!known) {
    spdlog::debug("dropping frame from {} for unknown client", source_ip);
    return {};
  }
  return outcome;
}

std::uint64_t ScanService::run_update(const UpdateSources& sources) {
  auto tx = db_.begin_update();
  for (const auto& path : sources.cpe_dictionaries) {
    auto stats = tx.ingest_cpe_dictionary(path);
    spdlog::info("dictionary {}: {} names, {} skipped", path.string(), stats.upserted, stats.skipped);
  }
  for (const auto& path : sources.nvd_feeds) {
    auto stats = tx.ingest_nvd_feed(path);
    spdlog::info("feed {}: {} CVEs, {} skipped", path.string(), stats.upserted, stats.skipped);
  }
  for (const auto& path : sources.exploit_maps) {
    auto stats = tx.ingest_exploit_map(path);
    spdlog::info("exploit map {}: {} links, {} skipped", path.string(), stats.upserted, stats.skipped);
  }
  return tx.commit();
}

std::optional<ScanJob> ScanService::job(const std::string& token) const {
  std::lock_guard lock(jobs_mutex_);
  auto it = jobs_.find(token);
  if (it == jobs_.end()) return std::nullopt;
  return *it->second;
}

bool ScanService::wait_for(const std::string& token, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(jobs_mutex_);
  return jobs_cv_.wait_for(lock, timeout, [&] {
    auto it = jobs_.find(token);
    return it != jobs_.end() &&
           (it->second->state == JobState::Done || it->second->state == JobState::Failed);
  });
}

std::size_t ScanService::queued() const {
  std::lock_guard lock(jobs_mutex_);
  return queue_.size();
}

// ---------------------------------------------------------------------------
// TcpServer

TcpServer::TcpServer(ScanService& service, std::string bind_address, std::uint16_t port,
                     std::size_t connection_threads)
    : service_(service),
      bind_address_(std::move(bind_address)),
      requested_port_(port),
      connection_threads_(std::max<std::size_t>(1, connection_threads)) {}

TcpServer::~TcpServer() { stop(); }

void TcpServer::start() {
  if (running_.exchange(true)) return;
  listener_ = net::listen_tcp(bind_address_, requested_port_);
  bound_port_ = net::local_port(listener_);
  for (std::size_t i = 0; i < connection_threads_; ++i) handlers_.emplace_back([this] { connection_loop(); });
  acceptor_ = std::thread([this] { accept_loop(); });
  spdlog::info("listening on {}:{}", bind_address_, bound_port_);
}

void TcpServer::stop() {
  if (!running_.exchange(false)) return;
  if (acceptor_.joinable()) acceptor_.join();
  pending_cv_.notify_all();
  for (auto& t : handlers_) {
    if (t.joinable()) t.join();
  }
  handlers_.clear();
  pending_.clear();
  listener_ = net::Socket();
}

void TcpServer::accept_loop() {
  while (running_) {
    pollfd pfd{listener_.get(), POLLIN, 0};
    if (::poll(&pfd, 1, 100) <= 0) continue;
    sockaddr_in peer{};
    socklen_t len = sizeof(peer);
    net::Socket client(::accept(listener_.get(), reinterpret_cast<sockaddr*>(&peer), &len));
    if (!client) continue;
    char text[INET_ADDRSTRLEN] = {};
    ::inet_ntop(AF_INET, &peer.sin_addr, text, sizeof(text));
    {
      std::lock_guard lock(pending_mutex_);
      pending_.emplace_back(std::move(client), text);
    }
    pending_cv_.notify_one();
  }
}

void TcpServer::connection_loop() {
  while (true) {
    std::pair<net::Socket, std::string> item;
    {
      std::unique_lock lock(pending_mutex_);
      pending_cv_.wait(lock, [this] { return !running_ || !pending_.empty(); });
      if (!running_) return;
      item = std::move(pending_.front());
      pending_.pop_front();
    }
    serve(std::move(item.first), item.second);
  }
}

void TcpServer::serve(net::Socket socket, const std::string& peer) {
  net::set_io_timeout(socket, std::chrono::seconds(10));
  while (running_) {
    auto frame = net::read_frame(socket);
    if (!frame) return;
    auto outcome = service_.handle_frame(*frame, peer);
    if (!outcome.response) return;
    if (!net::write_all(socket, *outcome.response) || outcome.close) return;
  }
}

}  // namespace vulnscan
