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

#include <sstream>

#include "oracles.hpp"
#include "vulnscan/client.hpp"
#include "vulnscan/net.hpp"
#include "vulnscan/server.hpp"

using namespace vulnscan;
using namespace std::chrono_literals;

namespace {

const UnixSeconds kNow{std::chrono::seconds(1'700'000'000)};

ClientConfig config_for(const CredentialStore::Provisioned& p) {
  ClientConfig c;
  c.server = "127.0.0.1:1";
  c.client_id = p.client_id;
  c.secret = p.secret;
  c.salt = p.salt;
  c.poll_interval = 1s;
  c.max_wait = 10s;
  return c;
}

/// Plays the server side with a scripted reply per request and records what
/// the client sent.
class ScriptedServer : public Transport {
 public:
  using Script = std::function<MessageBody(const OpenedMessage&, std::size_t call)>;

  ScriptedServer(ClientCredential cred, Script script) : cred_(std::move(cred)), script_(std::move(script)) {}

  Bytes exchange(const Bytes& frame) override {
    auto opened = open_message(decode_frame(frame), cred_, kNow);
    sns.push_back(opened.sn);
    auto reply = script_(opened, sns.size());
    return encode_frame(seal_message(cred_, reply, ++sent_, kNow));
  }

  std::vector<std::uint64_t> sns;

 private:
  ClientCredential cred_;
  Script script_;
  std::uint64_t sent_ = 1;
};

/// Forwards frames straight into a ScanService and counts them.
class LoopbackTransport : public Transport {
 public:
  explicit LoopbackTransport(ScanService& s) : service_(s) {}
  Bytes exchange(const Bytes& frame) override {
    ++frames;
    auto out = service_.handle_frame(frame, "127.0.0.1");
    if (!out.response) throw net::TransportError("dropped");
    return *out.response;
  }
  std::size_t frames = 0;

 private:
  ScanService& service_;
};

ScanReport sample_report() {
  ScanReport r;
  r.token = "t";
  PvcScanResult a;
  a.pvc.name = "Adobe Reader";
  a.pvc.display_version = "9.0";
  a.cve_ids = {"CVE-2009-0001", "CVE-2009-0002"};
  a.generated_cpes = {parse_cpe_uri("cpe:/a:adobe:reader:9.0")};
  r.results.push_back(a);
  r.cves["CVE-2009-0001"] = {9.8, true};
  r.cves["CVE-2009-0002"] = {std::nullopt, false};
  return r;
}

auto no_sleep = [](std::chrono::milliseconds) {};

}  // namespace

TEST_SUITE("client") {

TEST_CASE("configuration limits") {
  CredentialStore store;
  auto cfg = config_for(store.provision("alice"));
  CHECK_NOTHROW(cfg.validate());
  cfg.poll_interval = 500ms;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = config_for(store.provision("bob"));
  cfg.secret.clear();
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("submit gets a token") {
  CredentialStore store;
  auto p = store.provision("alice");
  auto server_side = make_credential(p.client_id, as_bytes(p.secret), p.salt);
  ScriptedServer server(server_side, [](const OpenedMessage& m, std::size_t) -> MessageBody {
    CHECK(m.type == MessageType::ScanRequest);
    return ScanAcceptBody{"tok-1", "alice"};
  });
  ScanClient client(config_for(p), server, [] { return kNow; }, no_sleep);
  auto out = client.submit(Inventory{"desk", {}});
  CHECK(out.status == ExitStatus::Ok);
  CHECK(out.token == "tok-1");
}

TEST_CASE("forged echo is a MITM") {
  CredentialStore store;
  auto p = store.provision("alice");
  ScriptedServer server(make_credential(p.client_id, as_bytes(p.secret), p.salt),
                        [](const OpenedMessage&, std::size_t) -> MessageBody { return ScanAcceptBody{"tok", "mallory"}; });
  ScanClient client(config_for(p), server, [] { return kNow; }, no_sleep);
  auto out = client.submit(Inventory{});
  CHECK(out.status == ExitStatus::Mitm);
  CHECK(out.token.empty());
}

TEST_CASE("reject reason is surfaced") {
  CredentialStore store;
  auto p = store.provision("alice");
  ScriptedServer server(make_credential(p.client_id, as_bytes(p.secret), p.salt),
                        [](const OpenedMessage&, std::size_t) -> MessageBody { return ScanRejectBody{"default-deny"}; });
  ScanClient client(config_for(p), server, [] { return kNow; }, no_sleep);
  auto out = client.submit(Inventory{});
  CHECK(out.status == ExitStatus::Rejected);
  CHECK(out.message == "default-deny");
}

TEST_CASE("offline server") {
  // Grab a free port, then close it so nothing listens there.
  std::uint16_t port;
  {
    auto s = net::listen_tcp("127.0.0.1", 0);
    port = net::local_port(s);
  }
  CredentialStore store;
  auto p = store.provision("alice");
  TcpTransport transport("127.0.0.1", port, 500ms, 2, 1ms);
  ScanClient client(config_for(p), transport, unix_now, no_sleep);
  auto out = client.submit(Inventory{});
  CHECK(out.status == ExitStatus::Transport);
}

TEST_CASE("report after the second poll, with increasing sequence numbers") {
  CredentialStore store;
  auto p = store.provision("alice");
  auto report = sample_report();
  ScriptedServer server(make_credential(p.client_id, as_bytes(p.secret), p.salt),
                        [&](const OpenedMessage& m, std::size_t call) -> MessageBody {
                          CHECK(m.type == MessageType::ResultRequest);
                          if (call < 2) return ResultNotReadyBody{};
                          return ResultResponseBody{report_to_json(report)};
                        });
  std::size_t sleeps = 0;
  ScanClient client(config_for(p), server, [] { return kNow; }, [&](std::chrono::milliseconds d) {
    CHECK(d == 1s);
    ++sleeps;
  });
  auto out = client.poll("t");
  CHECK(out.status == ExitStatus::Ok);
  CHECK(out.polls == 2);
  CHECK(sleeps == 1);
  REQUIRE(out.report);
  CHECK(out.report->cves == report.cves);
  REQUIRE(server.sns.size() == 2);
  CHECK(server.sns[1] > server.sns[0]);
}

TEST_CASE("poll limit and timeout are distinct") {
  CredentialStore store;
  auto p = store.provision("alice");
  ScriptedServer limited(make_credential(p.client_id, as_bytes(p.secret), p.salt),
                         [](const OpenedMessage&, std::size_t call) -> MessageBody {
                           if (call < 3) return ResultNotReadyBody{};
                           return ScanRejectBody{"poll-limit"};
                         });
  ScanClient a(config_for(p), limited, [] { return kNow; }, no_sleep);
  auto out = a.poll("t");
  CHECK(out.status == ExitStatus::PollLimit);
  CHECK(out.polls == 3);

  ScriptedServer never(make_credential(p.client_id, as_bytes(p.secret), p.salt),
                       [](const OpenedMessage&, std::size_t) -> MessageBody { return ResultNotReadyBody{}; });
  auto cfg = config_for(p);
  cfg.max_wait = 3s;
  ScanClient b(cfg, never, [] { return kNow; }, no_sleep);
  auto timed_out = b.poll("t");
  CHECK(timed_out.status == ExitStatus::Timeout);
  CHECK(timed_out.polls == 4);
  for (std::size_t i = 1; i < never.sns.size(); ++i) CHECK(never.sns[i] > never.sns[i - 1]);
}

TEST_CASE("against the real service") {
  VulnDb db(":memory:");
  {
    CveRecord r;
    r.id = "CVE-2009-0001";
    r.applicability = {parse_cpe_uri("cpe:/a:adobe:reader:9.0")};
    auto tx = db.begin_update();
    tx.ingest_nvd_feed_text(oracle::nvd_feed({r}).dump());
    tx.ingest_cpe_dictionary_text("cpe:/a:adobe:reader:9.0\n");
    tx.commit();
  }
  CredentialStore store;
  auto p = store.provision("alice");
  ServerConfig cfg;
  FirewallRule allow;
  allow.action = FirewallRule::Action::Allow;
  cfg.firewall = {allow};
  cfg.max_polls_per_token = 1;
  ScanService service(cfg, db, store);
  LoopbackTransport transport(service);
  ScanClient client(config_for(p), transport, unix_now, no_sleep);

  Pvc reader;
  reader.name = "Adobe Reader";
  reader.display_version = "9.0";
  auto submitted = client.submit(Inventory{"desk", {reader}});
  REQUIRE(submitted.status == ExitStatus::Ok);
  // Workers are not running, so the job never finishes and the single
  // permitted poll is followed by a poll-limit reject.
  auto polled = client.poll(submitted.token);
  CHECK(polled.status == ExitStatus::PollLimit);
  CHECK(transport.frames == 3);
}

TEST_CASE("text and json rendering") {
  std::ostringstream empty;
  CHECK(render_report(ScanReport{}, ReportFormat::Text, 7.0, empty) == ExitStatus::Ok);
  CHECK(empty.str().find("0 vulnerabilities") != std::string::npos);

  auto report = sample_report();
  std::ostringstream text;
  CHECK(render_report(report, ReportFormat::Text, 7.0, text) == ExitStatus::Threshold);
  CHECK(text.str().find("Adobe Reader 9.0: 2 CVEs, worst CVSS 9.8, exploit available") != std::string::npos);
  std::ostringstream lenient;
  CHECK(render_report(report, ReportFormat::Text, 9.9, lenient) == ExitStatus::Ok);
  std::ostringstream no_threshold;
  CHECK(render_report(report, ReportFormat::Text, std::nullopt, no_threshold) == ExitStatus::Ok);

  std::ostringstream js;
  render_report(report, ReportFormat::Json, std::nullopt, js);
  auto back = report_from_json(nlohmann::json::parse(js.str()));
  CHECK(back.cves == report.cves);
  CHECK(back.token == report.token);
  REQUIRE(back.results.size() == 1);
  CHECK(back.results[0].cve_ids == report.results[0].cve_ids);
  CHECK(back.results[0].pvc == report.results[0].pvc);
  CHECK(report_to_json(back) == report_to_json(report));
}

TEST_CASE("tcp loopback round trip") {
  VulnDb db(":memory:");
  {
    auto tx = db.begin_update();
    tx.ingest_cpe_dictionary_text("cpe:/a:adobe:reader\n");
    tx.commit();
  }
  CredentialStore store;
  auto p = store.provision("alice");
  ServerConfig cfg;
  FirewallRule allow;
  allow.action = FirewallRule::Action::Allow;
  allow.cidr = IpNetwork::parse("127.0.0.0/8");
  cfg.firewall = {allow};
  ScanService service(cfg, db, store);
  service.start();
  TcpServer server(service, "127.0.0.1", 0, 2);
  server.start();

  TcpTransport transport("127.0.0.1", server.port(), 2s, 0);
  ScanClient client(config_for(p), transport, unix_now, [](auto d) { std::this_thread::sleep_for(d / 20); });
  Pvc pvc;
  pvc.name = "notepad";
  auto submitted = client.submit(Inventory{"desk", {pvc}});
  REQUIRE(submitted.status == ExitStatus::Ok);
  auto polled = client.poll(submitted.token);
  CHECK(polled.status == ExitStatus::Ok);
  REQUIRE(polled.report);
  CHECK(polled.report->results.size() == 1);
  server.stop();
  service.stop();
}

}
