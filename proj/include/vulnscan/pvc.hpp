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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vulnscan/crypto.hpp"

namespace vulnscan {

class InventoryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PvcKind { OperatingSystem, Application, Hardware };

/// "os" | "app" | "hw"
std::string_view to_string(PvcKind kind) noexcept;
std::optional<PvcKind> pvc_kind_from_string(std::string_view text) noexcept;

/// A possibly-vulnerable component. Only the name is required.
struct Pvc {
  PvcKind kind = PvcKind::Application;
  std::string name;
  std::optional<std::string> vendor;
  std::optional<std::string> version;
  std::optional<std::string> edition;
  std::optional<std::string> update;
  std::optional<std::string> language;
  std::optional<std::string> publisher;
  std::optional<std::string> display_version;
  std::optional<std::string> service_pack;
  std::optional<std::uint64_t> major;
  std::optional<std::uint64_t> minor;
  std::optional<std::uint64_t> build;
  std::optional<std::uint64_t> revision;

  bool operator==(const Pvc&) const = default;
};

struct Inventory {
  std::string target_label;
  std::vector<Pvc> pvcs;

  bool operator==(const Inventory&) const = default;
};

nlohmann::json pvc_to_json(const Pvc& pvc);
/// Throws InventoryError on a missing/empty name, an unknown kind, or
/// mistyped fields. Unknown keys are logged and ignored.
Pvc pvc_from_json(const nlohmann::json& record);

nlohmann::json inventory_to_json(const Inventory& inventory);
Inventory inventory_from_json(const nlohmann::json& document);

Inventory load_inventory(const std::filesystem::path& path);

/// Injective byte encoding of every Pvc field in declared order. Keys are
/// lowercase; absent fields are a fixed sentinel; present values are
/// length-prefixed verbatim UTF-8.
std::string canonical_serialization(const Pvc& pvc);

/// SHA-256 over canonical_serialization.
Digest fingerprint_pvc(const Pvc& pvc);

}  // namespace vulnscan
