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

#include "vulnscan/firewall.hpp"

#include <arpa/inet.h>
#include <fnmatch.h>

#include <charconv>
#include <stdexcept>

namespace vulnscan {

namespace {

struct Address {
  bool v6 = false;
  std::array<std::uint8_t, 16> bytes{};
};

std::optional<Address> parse_address(std::string_view text) {
  std::string s(text);
  Address a;
  if (inet_pton(AF_INET, s.c_str(), a.bytes.data()) == 1) return a;
  if (inet_pton(AF_INET6, s.c_str(), a.bytes.data()) == 1) {
    a.v6 = true;
    return a;
  }
  return std::nullopt;
}

}  // namespace

std::optional<IpNetwork> IpNetwork::parse(std::string_view cidr) {
  auto slash = cidr.find('/');
  auto address = parse_address(cidr.substr(0, slash));
  if (!address) return std::nullopt;
  const unsigned max_prefix = address->v6 ? 128 : 32;
  unsigned prefix = max_prefix;
  if (slash != std::string_view::npos) {
    auto digits = cidr.substr(slash + 1);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), prefix);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || prefix > max_prefix) {
      return std::nullopt;
    }
  }
  IpNetwork net;
  net.v6_ = address->v6;
  net.bytes_ = address->bytes;
  net.prefix_ = prefix;
  return net;
}

bool IpNetwork::contains(std::string_view text) const {
  auto address = parse_address(text);
  if (!address || address->v6 != v6_) return false;
  unsigned full = prefix_ / 8;
  for (unsigned i = 0; i < full; ++i) {
    if (address->bytes[i] != bytes_[i]) return false;
  }
  unsigned rem = prefix_ % 8;
  if (rem == 0) return true;
  auto mask = static_cast<std::uint8_t>(0xff << (8 - rem));
  return (address->bytes[full] & mask) == (bytes_[full] & mask);
}

std::string IpNetwork::to_string() const {
  char buffer[INET6_ADDRSTRLEN] = {};
  inet_ntop(v6_ ? AF_INET6 : AF_INET, bytes_.data(), buffer, sizeof(buffer));
  return std::string(buffer) + "/" + std::to_string(prefix_);
}

bool FirewallRule::matches(std::string_view source_ip, std::string_view client_id,
                           bool key_valid) const {
  if (cidr && !cidr->contains(source_ip)) return false;
  if (client_id_pattern &&
      fnmatch(client_id_pattern->c_str(), std::string(client_id).c_str(), 0) != 0) {
    return false;
  }
  if (require_valid_key && !key_valid) return false;
  return true;
}

FirewallRule firewall_rule_from_json(const nlohmann::json& rule) {
  FirewallRule out;
  // A misspelt condition would silently widen an allow rule.
  for (const auto& [key, value] : rule.items()) {
    if (key != "action" && key != "cidr" && key != "client_id_pattern" && key != "require_valid_key") {
      throw std::invalid_argument("unknown firewall rule key '" + key + "'");
    }
  }
  auto action = rule.at("action").get<std::string>();
  if (action == "allow") {
    out.action = FirewallRule::Action::Allow;
  } else if (action == "deny") {
    out.action = FirewallRule::Action::Deny;
  } else {
    throw std::invalid_argument("firewall action must be 'allow' or 'deny', got '" + action + "'");
  }
  if (auto it = rule.find("cidr"); it != rule.end() && !it->is_null()) {
    out.cidr = IpNetwork::parse(it->get<std::string>());
    if (!out.cidr) throw std::invalid_argument("invalid CIDR '" + it->get<std::string>() + "'");
  }
  if (auto it = rule.find("client_id_pattern"); it != rule.end() && !it->is_null()) {
    out.client_id_pattern = it->get<std::string>();
  }
  out.require_valid_key = rule.value("require_valid_key", true);
  return out;
}

Verdict verify_request(std::string_view source_ip, std::string_view client_id, bool key_valid,
                       std::span<const FirewallRule> rules) {
  for (std::size_t i = 0; i < rules.size(); ++i) {
    if (!rules[i].matches(source_ip, client_id, key_valid)) continue;
    if (rules[i].action == FirewallRule::Action::Allow) return {true, {}};
    return {false, "denied by firewall rule " + std::to_string(i)};
  }
  return {false, "default-deny"};
}

}  // namespace vulnscan
