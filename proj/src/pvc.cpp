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

#include "vulnscan/pvc.hpp"

#include <algorithm>
#include <array>
#include <fstream>

#include <spdlog/spdlog.h>

#include "vulnscan/cpe.hpp"

namespace vulnscan {

namespace {

using json = nlohmann::json;

constexpr std::array<std::string_view, 14> kKnownKeys = {
    "kind",     "name",      "vendor",          "version",      "edition",
    "update",   "language",  "publisher",       "display_version", "service_pack",
    "major",    "minor",     "build",           "revision"};

constexpr char kAbsent = '\x00';
constexpr char kPresent = '\x01';

std::optional<std::string> read_string(const json& record, const char* key) {
  auto it = record.find(key);
  if (it == record.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    throw InventoryError(std::string("field '") + key + "' must be a string");
  }
  return it->get<std::string>();
}

std::optional<std::uint64_t> read_uint(const json& record, const char* key) {
  auto it = record.find(key);
  if (it == record.end() || it->is_null()) return std::nullopt;
  if (it->is_number_unsigned()) return it->get<std::uint64_t>();
  if (it->is_number_integer()) {
    auto v = it->get<std::int64_t>();
    if (v >= 0) return static_cast<std::uint64_t>(v);
  }
  // Inventories collected from registries often carry numeric strings.
  if (it->is_string()) {
    const auto& s = it->get_ref<const std::string&>();
    if (!s.empty() && s.find_first_not_of("0123456789") == std::string::npos) {
      return std::stoull(s);
    }
  }
  throw InventoryError(std::string("field '") + key + "' must be a non-negative integer");
}

void put(json& out, const char* key, const std::optional<std::string>& value) {
  if (value) out[key] = *value;
}

void put(json& out, const char* key, const std::optional<std::uint64_t>& value) {
  if (value) out[key] = *value;
}

void append_field(std::string& out, std::string_view key, const std::optional<std::string>& value) {
  out.append(key);
  out.push_back('=');
  if (!value) {
    out.push_back(kAbsent);
  } else {
    out.push_back(kPresent);
    out.append(std::to_string(value->size()));
    out.push_back(':');
    out.append(*value);
  }
  out.push_back('\n');
}

void append_field(std::string& out, std::string_view key, const std::optional<std::uint64_t>& value) {
  append_field(out, key, value ? std::optional<std::string>(std::to_string(*value)) : std::nullopt);
}

}  // namespace

std::string_view to_string(PvcKind kind) noexcept {
  switch (kind) {
    case PvcKind::OperatingSystem: return "os";
    case PvcKind::Application: return "app";
    case PvcKind::Hardware: return "hw";
  }
  return "app";
}

std::optional<PvcKind> pvc_kind_from_string(std::string_view text) noexcept {
  if (text == "os") return PvcKind::OperatingSystem;
  if (text == "app") return PvcKind::Application;
  if (text == "hw") return PvcKind::Hardware;
  return std::nullopt;
}

json pvc_to_json(const Pvc& pvc) {
  json out = json::object();
  out["kind"] = std::string(to_string(pvc.kind));
  out["name"] = pvc.name;
  put(out, "vendor", pvc.vendor);
  put(out, "version", pvc.version);
  put(out, "edition", pvc.edition);
  put(out, "update", pvc.update);
  put(out, "language", pvc.language);
  put(out, "publisher", pvc.publisher);
  put(out, "display_version", pvc.display_version);
  put(out, "service_pack", pvc.service_pack);
  put(out, "major", pvc.major);
  put(out, "minor", pvc.minor);
  put(out, "build", pvc.build);
  put(out, "revision", pvc.revision);
  return out;
}

Pvc pvc_from_json(const json& record) {
  if (!record.is_object()) throw InventoryError("PVC record must be a JSON object");

  Pvc pvc;
  auto kind_text = read_string(record, "kind");
  if (!kind_text) throw InventoryError("PVC record missing 'kind'");
  auto kind = pvc_kind_from_string(*kind_text);
  if (!kind) throw InventoryError("unknown PVC kind '" + *kind_text + "'");
  pvc.kind = *kind;

  auto name = read_string(record, "name");
  if (!name || normalize_token(*name).empty()) throw InventoryError("PVC record missing required 'name'");
  pvc.name = std::move(*name);

  pvc.vendor = read_string(record, "vendor");
  pvc.version = read_string(record, "version");
  pvc.edition = read_string(record, "edition");
  pvc.update = read_string(record, "update");
  pvc.language = read_string(record, "language");
  pvc.publisher = read_string(record, "publisher");
  pvc.display_version = read_string(record, "display_version");
  pvc.service_pack = read_string(record, "service_pack");
  pvc.major = read_uint(record, "major");
  pvc.minor = read_uint(record, "minor");
  pvc.build = read_uint(record, "build");
  pvc.revision = read_uint(record, "revision");

  for (const auto& [key, _] : record.items()) {
    if (std::find(kKnownKeys.begin(), kKnownKeys.end(), key) == kKnownKeys.end()) {
      spdlog::warn("inventory: ignoring unknown PVC field '{}' on '{}'", key, pvc.name);
    }
  }
  return pvc;
}

json inventory_to_json(const Inventory& inventory) {
  json pvcs = json::array();
  for (const auto& pvc : inventory.pvcs) pvcs.push_back(pvc_to_json(pvc));
  return json{{"target_label", inventory.target_label}, {"pvcs", std::move(pvcs)}};
}

Inventory inventory_from_json(const json& document) {
  if (!document.is_object()) throw InventoryError("inventory must be a JSON object");
  Inventory inventory;
  if (auto label = read_string(document, "target_label")) inventory.target_label = *label;

  auto it = document.find("pvcs");
  if (it == document.end() || it->is_null()) return inventory;
  if (!it->is_array()) throw InventoryError("'pvcs' must be an array");

  inventory.pvcs.reserve(it->size());
  std::size_t index = 0;
  for (const auto& record : *it) {
    try {
      inventory.pvcs.push_back(pvc_from_json(record));
    } catch (const InventoryError& e) {
      throw InventoryError("pvcs[" + std::to_string(index) + "]: " + e.what());
    }
    ++index;
  }
  return inventory;
}

Inventory load_inventory(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InventoryError("cannot open inventory file '" + path.string() + "'");
  json document;
  try {
    in >> document;
  } catch (const json::parse_error& e) {
    throw InventoryError("inventory '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return inventory_from_json(document);
}

std::string canonical_serialization(const Pvc& pvc) {
  std::string out;
  out.reserve(128 + pvc.name.size());
  append_field(out, "kind", std::optional<std::string>(std::string(to_string(pvc.kind))));
  append_field(out, "name", std::optional<std::string>(pvc.name));
  append_field(out, "vendor", pvc.vendor);
  append_field(out, "version", pvc.version);
  append_field(out, "edition", pvc.edition);
  append_field(out, "update", pvc.update);
  append_field(out, "language", pvc.language);
  append_field(out, "publisher", pvc.publisher);
  append_field(out, "display_version", pvc.display_version);
  append_field(out, "service_pack", pvc.service_pack);
  append_field(out, "major", pvc.major);
  append_field(out, "minor", pvc.minor);
  append_field(out, "build", pvc.build);
  append_field(out, "revision", pvc.revision);
  return out;
}

Digest fingerprint_pvc(const Pvc& pvc) {
  return sha256(as_bytes(canonical_serialization(pvc)));
}

}  // namespace vulnscan
