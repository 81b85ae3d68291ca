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

#include <doctest.h>

#include <atomic>
#include <thread>

#include "oracles.hpp"
#include "vulnscan/server.hpp"

using namespace vulnscan;
using namespace std::chrono_literals;
using nlohmann::json;

namespace {

const UnixSeconds kStart{std::chrono::seconds(1'700'000'000)};

FirewallRule allow_all() {
  FirewallRule r;
  r.action = FirewallRule::Action::Allow;
  return r;
}

void seed_db(VulnDb& db) {
  CveRecord r;
  r.id = "CVE-2009-0001";
  r.applicability = {parse_cpe_uri("cpe:/a:adobe:reader:9.0")};
  r.cvss_scores = {{"3.1", 9.3}};
  auto tx = db.begin_update();
  tx.ingest_nvd_feed_text(oracle::nvd_feed({r}).dump());
  tx.ingest_cpe_dictionary_text("cpe:/a:adobe:reader:9.0\n");
  tx.commit();
}

Inventory one_app() {
  Pvc p;
  p.name = "Adobe Reader";
  p.display_version = "9.0";
  return Inventory{"desk", {p}};
}

/// Server plus one provisioned client with a controllable clock.
struct Harness {
  explicit Harness(ServerConfig cfg = {}, bool seeded = true) : config(std::move(cfg)) {
    if (config.firewall.empty()) config.firewall = {allow_all()};
    if (seeded) seed_db(db);
    auto provisioned = credentials.provision("alice");
    client = make_credential("alice", as_bytes(provisioned.secret), provisioned.salt);
    client.sent_sn = 1000;
    service = std::make_unique<ScanService>(config, db, credentials, [this] { return now.load(); });
  }

  Bytes frame(const MessageBody& body) { return encode_frame(seal_message(client, body, client.next_send_sn(), now)); }

  /// Sends a frame as the client and opens the reply.
  std::optional<MessageBody> send(const MessageBody& body, std::string_view ip = "10.0.0.1") {
    auto out = service->handle_frame(frame(body), ip);
    if (!out.response) return std::nullopt;
    return open_message(decode_frame(*out.response), client, now).body;
  }

  ServerConfig config;
  VulnDb db{":memory:"};
  CredentialStore credentials;
  ClientCredential client;
  std::atomic<UnixSeconds> now{kStart};
  std::unique_ptr<ScanService> service;
};

}  // namespace

TEST_SUITE("server") {

TEST_CASE("firewall rules") {
  FirewallRule lan;
  lan.action = FirewallRule::Action::Allow;
  lan.cidr = IpNetwork::parse("10.0.0.0/8");
  std::vector<FirewallRule> rules = {lan};
  CHECK(verify_request("10.1.2.3", "alice", true, rules).accepted);
  CHECK_FALSE(verify_request("11.1.2.3", "alice", true, rules).accepted);
  CHECK_FALSE(verify_request("10.1.2.3", "alice", false, rules).accepted);

  auto verdict = verify_request("10.1.2.3", "alice", true, {});
  CHECK_FALSE(verdict.accepted);
  CHECK(verdict.reason == "default-deny");

  FirewallRule evil;
  evil.action = FirewallRule::Action::Deny;
  evil.client_id_pattern = "evil*";
  std::vector<FirewallRule> ordered = {evil, lan};
  CHECK_FALSE(verify_request("10.1.2.3", "evil-corp", true, ordered).accepted);
  CHECK(verify_request("10.1.2.3", "good-corp", true, ordered).accepted);
}

TEST_CASE("firewall networks and json rules") {
  auto v6 = IpNetwork::parse("2001:db8::/32");
  REQUIRE(v6);
  CHECK(v6->contains("2001:db8::1"));
  CHECK_FALSE(v6->contains("2001:db9::1"));
  CHECK_FALSE(v6->contains("10.0.0.1"));
  auto host = IpNetwork::parse("192.168.1.7");
  REQUIRE(host);
  CHECK(host->contains("192.168.1.7"));
  CHECK_FALSE(host->contains("192.168.1.8"));
  CHECK_FALSE(IpNetwork::parse("10.0.0.0/33"));
  CHECK_FALSE(IpNetwork::parse("not an ip"));

  auto rule = firewall_rule_from_json(json{{"action", "allow"}, {"cidr", "127.0.0.0/8"}, {"client_id_pattern", "lab-*"}});
  CHECK(rule.matches("127.0.0.1", "lab-7", true));
  CHECK_FALSE(rule.matches("127.0.0.1", "prod-7", true));
  CHECK_THROWS(firewall_rule_from_json(json{{"action", "maybe"}}));
  CHECK_THROWS(firewall_rule_from_json(json{{"action", "allow"}, {"client_id", "lab-*"}}));
}

TEST_CASE("exponential blocking") {
  BlockState s;
  auto t = kStart;
  auto d1 = apply_rate_limit(s, true, t, 2);
  CHECK(d1.blocked);
  CHECK(d1.until - t == 2s);

  // While blocked nothing changes, even for another violation.
  auto while_blocked = apply_rate_limit(s, true, t + 1s, 2);
  CHECK(while_blocked.blocked);
  CHECK(s.violations == 1);
  CHECK(while_blocked.until == d1.until);

  t = d1.until;
  CHECK_FALSE(apply_rate_limit(s, false, t, 2).blocked);
  CHECK(apply_rate_limit(s, true, t, 2).until - t == 4s);
  t += 4s;
  CHECK(apply_rate_limit(s, true, t, 2).until - t == 8s);

  BlockState many;
  many.violations = 500;
  auto capped = apply_rate_limit(many, true, kStart, 2);
  CHECK(capped.until > kStart);
  CHECK(capped.until - kStart <= std::chrono::hours(24 * 366));
}

TEST_CASE("configuration") {
  auto c = server_config_from_json(json{{"port", 9000},
                                        {"worker_count", 3},
                                        {"freshness_window_seconds", 30},
                                        {"firewall", {{{"action", "allow"}, {"cidr", "127.0.0.1/32"}}}}});
  CHECK(c.port == 9000);
  CHECK(c.worker_count == 3);
  CHECK(c.freshness_window == 30s);
  CHECK(c.firewall.size() == 1);
  CHECK_THROWS_AS(server_config_from_json(json{{"worker_count", 0}}), std::invalid_argument);
  CHECK(ServerConfig{}.firewall.empty());
}

TEST_CASE("credential store persistence") {
  oracle::TempDir dir;
  auto path = dir.path() / "creds.json";
  CredentialStore store;
  auto p = store.provision("alice");
  store.save(path);
  CHECK(oracle::read_file(path).find(p.secret) == std::string::npos);

  CredentialStore loaded;
  loaded.load(path);
  CHECK(loaded.contains("alice"));
  Key128 stored{};
  loaded.with_credential("alice", [&](ClientCredential& c) { stored = c.key; });
  CHECK(stored == derive_client_key(as_bytes(p.secret), p.salt));

  CredentialStore missing;
  missing.load(dir.path() / "nope.json");
  CHECK(missing.size() == 0);
}

TEST_CASE("FIFO with one worker") {
  ServerConfig cfg;
  cfg.worker_count = 1;
  Harness h(cfg);
  std::vector<std::string> tokens;
  for (int i = 0; i < 3; ++i) tokens.push_back(std::get<std::string>(h.service->enqueue_job(one_app(), "alice")));
  h.service->start();
  for (const auto& t : tokens) REQUIRE(h.service->wait_for(t, 10s));
  for (std::size_t i = 0; i < tokens.size(); ++i) CHECK(h.service->job(tokens[i])->completion_index == i + 1);
}

TEST_CASE("full queue rejects") {
  ServerConfig cfg;
  cfg.queue_capacity = 2;
  Harness h(cfg);
  CHECK(std::holds_alternative<std::string>(h.service->enqueue_job(one_app(), "alice")));
  CHECK(std::holds_alternative<std::string>(h.service->enqueue_job(one_app(), "alice")));
  auto third = h.service->enqueue_job(one_app(), "alice");
  REQUIRE(std::holds_alternative<ScanRejectBody>(third));
  CHECK(std::get<ScanRejectBody>(third).reason == "busy");
}

TEST_CASE("tokens are unique") {
  ServerConfig cfg;
  cfg.queue_capacity = 20000;
  Harness h(cfg);
  std::set<std::string> tokens;
  for (int i = 0; i < 10000; ++i) tokens.insert(std::get<std::string>(h.service->enqueue_job({}, "alice")));
  CHECK(tokens.size() == 10000);
  CHECK(tokens.begin()->size() == 32);
}

TEST_CASE("result polling") {
  ServerConfig cfg;
  cfg.max_polls_per_token = 100;
  Harness h(cfg);
  auto token = std::get<std::string>(h.service->enqueue_job(one_app(), "alice"));

  auto early = h.service->fetch_result(token, "alice");
  CHECK(std::holds_alternative<ResultNotReadyBody>(early.response));
  CHECK_FALSE(early.violation);

  h.service->start();
  REQUIRE(h.service->wait_for(token, 10s));
  auto done = h.service->fetch_result(token, "alice");
  REQUIRE(std::holds_alternative<ResultResponseBody>(done.response));
  auto report = report_from_json(std::get<ResultResponseBody>(done.response).report);
  CHECK(report.summary().total_cves == 1);

  auto foreign = h.service->fetch_result(token, "mallory");
  REQUIRE(std::holds_alternative<ScanRejectBody>(foreign.response));
  CHECK(std::get<ScanRejectBody>(foreign.response).reason == "impersonation");
  CHECK(foreign.violation);

  auto unknown = h.service->fetch_result("ffff", "alice");
  REQUIRE(std::holds_alternative<ScanRejectBody>(unknown.response));
  CHECK(std::get<ScanRejectBody>(unknown.response).reason == "unknown-token");

  for (int i = 2; i < 100; ++i) h.service->fetch_result(token, "alice");  // polls 3..100
  CHECK(h.service->job(token)->polls_used == 100);
  CHECK(std::holds_alternative<ResultResponseBody>(h.service->fetch_result(token, "alice").response) == false);
  CHECK(h.service->job(token)->polls_used == 101);
}

TEST_CASE("101st poll with a limit of 100") {
  ServerConfig cfg;
  cfg.max_polls_per_token = 100;
  Harness h(cfg);
  auto token = std::get<std::string>(h.service->enqueue_job(one_app(), "alice"));
  for (int i = 0; i < 100; ++i) {
    CHECK(std::holds_alternative<ResultNotReadyBody>(h.service->fetch_result(token, "alice").response));
  }
  auto over = h.service->fetch_result(token, "alice");
  REQUIRE(std::holds_alternative<ScanRejectBody>(over.response));
  CHECK(std::get<ScanRejectBody>(over.response).reason == "poll-limit");
  CHECK(over.violation);
}

TEST_CASE("frame handling happy path") {
  Harness h;
  h.service->start();
  auto reply = h.send(ScanRequestBody{one_app()});
  REQUIRE(reply);
  REQUIRE(std::holds_alternative<ScanAcceptBody>(*reply));
  const auto& accept = std::get<ScanAcceptBody>(*reply);
  CHECK(client_check_echo("alice", accept));
  REQUIRE(h.service->wait_for(accept.token, 10s));
  auto result = h.send(ResultRequestBody{accept.token});
  REQUIRE(result);
  CHECK(std::holds_alternative<ResultResponseBody>(*result));
}

TEST_CASE("frames that are dropped") {
  Harness h;
  Bytes garbage = {0, 0, 0, 5, 1, 2, 3, 4, 5};
  CHECK_FALSE(h.service->handle_frame(garbage, "10.0.0.1").response);
  Bytes noise(64, 0xab);
  CHECK_FALSE(h.service->handle_frame(noise, "10.0.0.1").response);

  auto stranger = make_credential("stranger", as_bytes(std::string("x")), Salt128{});
  auto f = encode_frame(seal_message(stranger, ResultRequestBody{"t"}, 1, kStart));
  CHECK_FALSE(h.service->handle_frame(f, "10.0.0.1").response);

  auto forged = decode_frame(h.frame(ResultRequestBody{"t"}));
  forged.tag[0] ^= 1;
  CHECK_FALSE(h.service->handle_frame(encode_frame(forged), "10.0.0.1").response);
}

TEST_CASE("empty firewall rejects everything") {
  Harness h;
  h.service = std::make_unique<ScanService>(ServerConfig{}, h.db, h.credentials, [&h] { return h.now.load(); });
  auto out = h.service->handle_frame(h.frame(ScanRequestBody{one_app()}), "127.0.0.1");
  REQUIRE(out.response);
  auto body = open_message(decode_frame(*out.response), h.client, h.now).body;
  REQUIRE(std::holds_alternative<ScanRejectBody>(body));
  CHECK(std::get<ScanRejectBody>(body).reason == "default-deny");
  CHECK(h.service->queued() == 0);
}

TEST_CASE("replays get a protocol error, violations block") {
  Harness h;
  auto f = h.frame(ResultRequestBody{"nope"});
  REQUIRE(h.service->handle_frame(f, "10.0.0.1").response);
  auto replay = h.service->handle_frame(f, "10.0.0.1");
  REQUIRE(replay.response);
  auto body = open_message(decode_frame(*replay.response), h.client, h.now).body;
  REQUIRE(std::holds_alternative<ProtocolErrorBody>(body));
  CHECK(std::get<ProtocolErrorBody>(body).code == "replay");

  // A foreign token is a violation; the next request is blocked.
  auto token = std::get<std::string>(h.service->enqueue_job({}, "bob"));
  auto stolen = h.send(ResultRequestBody{token});
  REQUIRE(stolen);
  CHECK(std::get<ScanRejectBody>(*stolen).reason == "impersonation");
  auto blocked = h.send(ScanRequestBody{one_app()});
  REQUIRE(blocked);
  REQUIRE(std::holds_alternative<ProtocolErrorBody>(*blocked));
  CHECK(std::get<ProtocolErrorBody>(*blocked).code == "blocked");
  h.now = h.now.load() + 3s;
  auto later = h.send(ScanRequestBody{one_app()});
  REQUIRE(later);
  CHECK(std::holds_alternative<ScanAcceptBody>(*later));
}

TEST_CASE("100 concurrent submissions are all accounted for") {
  ServerConfig cfg;
  cfg.queue_capacity = 60;
  Harness h(cfg);
  std::vector<ClientCredential> clients;
  std::vector<Bytes> frames;
  for (int i = 0; i < 100; ++i) {
    auto p = h.credentials.provision("client-" + std::to_string(i));
    clients.push_back(make_credential(p.client_id, as_bytes(p.secret), p.salt));
    frames.push_back(encode_frame(seal_message(clients.back(), ScanRequestBody{one_app()}, 1, h.now)));
  }
  std::vector<std::optional<Bytes>> replies(100);
  std::vector<std::thread> threads;
  for (int i = 0; i < 100; ++i) {
    threads.emplace_back([&, i] { replies[i] = h.service->handle_frame(frames[i], "10.0.0.1").response; });
  }
  for (auto& t : threads) t.join();

  std::set<std::string> tokens;
  std::size_t busy = 0;
  for (int i = 0; i < 100; ++i) {
    REQUIRE(replies[i]);
    auto body = open_message(decode_frame(*replies[i]), clients[i], h.now).body;
    if (auto* a = std::get_if<ScanAcceptBody>(&body)) {
      tokens.insert(a->token);
    } else {
      REQUIRE(std::holds_alternative<ScanRejectBody>(body));
      CHECK(std::get<ScanRejectBody>(body).reason == "busy");
      ++busy;
    }
  }
  CHECK(tokens.size() == 60);
  CHECK(busy == 40);
  CHECK(h.service->queued() == 60);
}

TEST_CASE("updates are atomic") {
  Harness h;
  oracle::TempDir dir;
  CveRecord r;
  r.id = "CVE-2020-0001";
  r.applicability = {parse_cpe_uri("cpe:/a:x:y")};
  dir.write("feed.json", oracle::nvd_feed({r}).dump());
  dir.write("dict.txt", "cpe:/a:x:y\n");
  dir.write("exploits.csv", "EDB-1,CVE-2020-0001\n");
  dir.write("ignored.md", "hello");
  auto sources = discover_update_sources(dir.path());
  CHECK(sources.nvd_feeds.size() == 1);
  CHECK(sources.cpe_dictionaries.size() == 1);
  CHECK(sources.exploit_maps.size() == 1);

  auto before = h.db.generation();
  CHECK(h.service->run_update(sources) == before + 1);
  CHECK(h.db.snapshot()->find("CVE-2020-0001")->exploit_available);

  dir.write("zz-broken.json", "{ nope");
  CHECK_THROWS_AS(h.service->run_update(discover_update_sources(dir.path())), IngestError);
  CHECK(h.db.generation() == before + 1);
  CHECK(h.db.snapshot()->records().size() == 2);
  CHECK_THROWS_AS(discover_update_sources(dir.path() / "missing"), IngestError);
}

}
