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

// vulnscan client: submit an inventory, poll for the report, print it.

#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "vulnscan/client.hpp"
#include "vulnscan/net.hpp"

namespace {

using namespace vulnscan;

struct Options {
  std::string server, id, secret, salt_hex;
  double poll_seconds = 5;
  double max_wait_seconds = 300;
  unsigned retries = 3;
  bool json = false;
  std::optional<double> fail_on;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--server", o.server, "HOST:PORT")->required();
  cmd->add_option("--id", o.id, "Client identifier")->required();
  cmd->add_option("--secret", o.secret, "Client secret")->required();
  cmd->add_option("--salt", o.salt_hex, "Client salt (32 hex digits)")->required();
  cmd->add_option("--poll-interval", o.poll_seconds, "Seconds between result polls");
  cmd->add_option("--max-wait", o.max_wait_seconds, "Give up after this many seconds");
  cmd->add_option("--retries", o.retries, "Reconnect attempts on transport failure");
  cmd->add_flag("--json", o.json, "Print the report as JSON");
  cmd->add_option("--fail-on", o.fail_on, "Exit nonzero if any CVE has CVSS >= this");
}

ClientConfig make_config(const Options& o) {
  ClientConfig c;
  c.server = o.server;
  c.client_id = o.id;
  c.secret = o.secret;
  auto salt = from_hex(o.salt_hex);
  if (salt.size() != c.salt.size()) throw std::invalid_argument("salt must be 16 bytes of hex");
  std::copy(salt.begin(), salt.end(), c.salt.begin());
  c.poll_interval = std::chrono::milliseconds(static_cast<long long>(o.poll_seconds * 1000));
  c.max_wait = std::chrono::milliseconds(static_cast<long long>(o.max_wait_seconds * 1000));
  c.retries = o.retries;
  c.validate();
  return c;
}

int finish(ScanClient& client, const std::string& token, const Options& o) {
  auto polled = client.poll(token);
  if (polled.status != ExitStatus::Ok) {
    std::cerr << "result " << to_string(polled.status) << ": " << polled.message << '\n';
    return static_cast<int>(polled.status);
  }
  auto status = render_report(*polled.report, o.json ? ReportFormat::Json : ReportFormat::Text,
                              o.fail_on, std::cout);
  return static_cast<int>(status);
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("client"));
  CLI::App app{"vulnscan client"};
  app.require_subcommand(1);

  Options scan_opts, result_opts;
  std::string inventory_path, token;
  auto* scan_cmd = app.add_subcommand("scan", "Submit an inventory and wait for the report");
  add_common(scan_cmd, scan_opts);
  scan_cmd->add_option("--inventory", inventory_path, "Inventory JSON file")->required()->check(CLI::ExistingFile);

  auto* result_cmd = app.add_subcommand("result", "Fetch the report for an earlier token");
  add_common(result_cmd, result_opts);
  result_cmd->add_option("--token", token, "Token from a previous scan")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : static_cast<int>(ExitStatus::Usage);
  }

  const Options& o = *scan_cmd ? scan_opts : result_opts;
  try {
    auto config = make_config(o);
    auto [host, port] = net::split_host_port(config.server);
    TcpTransport transport(host, port, config.connect_timeout, config.retries);
    ScanClient client(config, transport);

    if (*scan_cmd) {
      auto inventory = load_inventory(inventory_path);
      auto submitted = client.submit(inventory);
      if (submitted.status != ExitStatus::Ok) {
        std::cerr << "scan " << to_string(submitted.status) << ": " << submitted.message << '\n';
        return static_cast<int>(submitted.status);
      }
      std::cerr << "token: " << submitted.token << '\n';
      return finish(client, submitted.token, o);
    }
    return finish(client, token, o);
  } catch (const InventoryError& e) {
    std::cerr << "inventory: " << e.what() << '\n';
    return static_cast<int>(ExitStatus::Usage);
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << '\n';
    return static_cast<int>(ExitStatus::Usage);
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return static_cast<int>(ExitStatus::Protocol);
  }
}
