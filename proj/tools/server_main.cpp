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

// vulnscan server: serve scans, ingest feeds, provision clients.

#include <csignal>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "vulnscan/server.hpp"

namespace {

using namespace vulnscan;

ServerConfig config_or_default(const std::string& path) {
  return path.empty() ? ServerConfig{} : load_server_config(path);
}

int serve(const std::string& config_path, int port_override) {
  auto config = config_or_default(config_path);
  if (port_override >= 0) config.port = static_cast<std::uint16_t>(port_override);
  if (config.firewall.empty()) spdlog::warn("firewall has no rules; every request will be rejected");

  VulnDb db(config.db_path);
  if (db.generation() < 1) spdlog::warn("database is empty; run 'server update' before scanning");
  CredentialStore credentials;
  credentials.load(config.credentials_path);
  spdlog::info("{} clients provisioned", credentials.size());

  // Block the signals before spawning threads so only sigwait sees them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  ScanService service(config, db, credentials);
  service.start();
  TcpServer server(service, config.bind_address, config.port, config.connection_threads);
  server.start();
  std::cout << "listening on " << config.bind_address << ':' << server.port() << std::endl;

  int signal = 0;
  sigwait(&signals, &signal);
  spdlog::info("signal {}, shutting down", signal);
  server.stop();
  service.stop();
  return 0;
}

int update(const std::string& config_path, std::string db_path, const std::string& feeds) {
  auto config = config_or_default(config_path);
  if (db_path.empty()) db_path = config.db_path;
  VulnDb db(db_path);
  CredentialStore credentials;
  ScanService service(config, db, credentials);
  auto sources = discover_update_sources(feeds);
  auto generation = service.run_update(sources);
  std::cout << "database generation " << generation << ", " << db.snapshot()->records().size()
            << " CVEs, " << db.snapshot()->dictionary_size() << " dictionary names\n";
  return 0;
}

int add_client(const std::string& config_path, std::string credentials_path, const std::string& id) {
  if (credentials_path.empty()) credentials_path = config_or_default(config_path).credentials_path;
  CredentialStore credentials;
  credentials.load(credentials_path);
  if (credentials.contains(id)) {
    std::cerr << "client '" << id << "' already exists\n";
    return 1;
  }
  auto provisioned = credentials.provision(id);
  credentials.save(credentials_path);
  std::cout << "id:     " << provisioned.client_id << '\n'
            << "secret: " << provisioned.secret << '\n'
            << "salt:   " << to_hex(provisioned.salt) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vulnscan server"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "Server configuration (JSON)")->check(CLI::ExistingFile);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  auto* serve_cmd = app.add_subcommand("serve", "Accept scan requests");
  int port = -1;
  serve_cmd->add_option("--port", port, "Override the configured port")->check(CLI::Range(0, 65535));

  auto* update_cmd = app.add_subcommand("update", "Ingest feeds from a directory in one transaction");
  std::string feeds, db_path;
  update_cmd->add_option("--feeds", feeds, "Directory of *.json feeds, *.txt dictionaries, *.csv exploit maps")
      ->required();
  update_cmd->add_option("--db", db_path, "Database file (overrides the config)");

  auto* client_cmd = app.add_subcommand("client", "Manage client credentials");
  client_cmd->require_subcommand(1);
  auto* add_cmd = client_cmd->add_subcommand("add", "Provision a new client");
  std::string client_id, credentials_path;
  add_cmd->add_option("--id", client_id, "Client identifier")->required();
  add_cmd->add_option("--credentials", credentials_path, "Credential file (overrides the config)");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*serve_cmd) return serve(config_path, port);
    if (*update_cmd) return update(config_path, db_path, feeds);
    if (*add_cmd) return add_client(config_path, credentials_path, client_id);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 1;
}
