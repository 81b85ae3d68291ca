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

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

namespace vulnscan {

/// An IPv4 or IPv6 network in CIDR form. A bare address is a host network.
class IpNetwork {
 public:
  static std::optional<IpNetwork> parse(std::string_view cidr);

  bool contains(std::string_view address) const;
  std::string to_string() const;

 private:
  bool v6_ = false;
  std::array<std::uint8_t, 16> bytes_{};
  unsigned prefix_ = 0;
};

struct FirewallRule {
  enum class Action { Allow, Deny };

  Action action = Action::Deny;
  std::optional<IpNetwork> cidr;
  std::optional<std::string> client_id_pattern;  // shell glob
  bool require_valid_key = true;

  /// True when every present condition holds.
  bool matches(std::string_view source_ip, std::string_view client_id, bool key_valid) const;
};

FirewallRule firewall_rule_from_json(const nlohmann::json& rule);

struct Verdict {
  bool accepted = false;
  std::string reason;
};

/// First matching rule decides; no match is a default-deny.
Verdict verify_request(std::string_view source_ip, std::string_view client_id, bool key_valid,
                       std::span<const FirewallRule> rules);

}  // namespace vulnscan
