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

#include "vulnscan/vuln_db.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "sqlite_store.hpp"

namespace vulnscan {

namespace {

using json = nlohmann::json;

constexpr std::string_view kSchema = R"sql(
CREATE TABLE IF NOT EXISTS meta (key TEXT PRIMARY KEY, value TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS cve (
  id TEXT PRIMARY KEY,
  description TEXT NOT NULL,
  published TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS cve_cvss (
  cve_id TEXT NOT NULL,
  version TEXT NOT NULL,
  score REAL NOT NULL,
  PRIMARY KEY (cve_id, version));
CREATE TABLE IF NOT EXISTS cve_cpe (
  cve_id TEXT NOT NULL,
  uri TEXT NOT NULL,
  PRIMARY KEY (cve_id, uri));
CREATE TABLE IF NOT EXISTS cpe_dict (uri TEXT PRIMARY KEY);
CREATE TABLE IF NOT EXISTS exploit_link (
  exploit_id TEXT NOT NULL,
  cve_id TEXT NOT NULL,
  PRIMARY KEY (exploit_id, cve_id));
CREATE TABLE IF NOT EXISTS cache (
  fingerprint BLOB PRIMARY KEY,
  generation INTEGER NOT NULL,
  cve_ids TEXT NOT NULL,
  cpes TEXT NOT NULL);
INSERT OR IGNORE INTO meta (key, value) VALUES ('generation', '0');
)sql";

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot read '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw IngestError("error reading '" + path.string() + "'");
  return buffer.str();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// NVD 1.1 feeds carry only the 2.3 formatted-string binding; map its first
// seven attributes onto the 2.2 model.
std::optional<CpeName> name_from_cpe23(std::string_view text) {
  std::vector<std::string> fields;
  std::string current;
  bool escaped = false;
  for (char c : text) {
    if (escaped) {
      current.push_back(c);
      escaped = false;
    } else if (c == '\\') {
      escaped = true;
    } else if (c == ':') {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.push_back(std::move(current));
  if (fields.size() < 3 || fields[0] != "cpe" || fields[1] != "2.3") return std::nullopt;
  if (fields[2].size() != 1) return std::nullopt;
  auto part = cpe_part_from_char(fields[2][0]);
  if (!part) return std::nullopt;

  CpeName name;
  name.part = *part;
  CpeComponent* slots[] = {&name.vendor, &name.product, &name.version,
                           &name.update, &name.edition, &name.language};
  for (std::size_t i = 0; i < 6 && i + 3 < fields.size(); ++i) {
    if (fields[i + 3] != "*") *slots[i] = CpeComponent(fields[i + 3]);
  }
  return name;
}

std::optional<CpeName> parse_any_binding(std::string_view uri) {
  uri = trim(uri);
  if (uri.starts_with("cpe:2.3:")) return name_from_cpe23(uri);
  try {
    return parse_cpe_uri(uri);
  } catch (const CpeParseError& e) {
    spdlog::warn("ingest: {}", e.what());
    return std::nullopt;
  }
}

std::optional<std::string> string_field(const json& object, std::initializer_list<const char*> keys) {
  for (const char* key : keys) {
    auto it = object.find(key);
    if (it != object.end() && it->is_string()) return it->get<std::string>();
  }
  return std::nullopt;
}

// Version-range qualifiers collapse to their inclusive bounds; a range with
// only exclusive bounds keeps the wildcard name.
void add_match(const json& match, std::set<CpeName>& out) {
  if (match.is_string()) {
    if (auto name = parse_any_binding(match.get<std::string>())) out.insert(*name);
    return;
  }
  if (!match.is_object()) return;
  if (auto it = match.find("vulnerable"); it != match.end() && it->is_boolean() && !it->get<bool>()) {
    return;
  }
  auto uri = string_field(match, {"cpe22Uri", "cpe23Uri", "cpe_uri", "criteria"});
  if (!uri) return;
  auto base = parse_any_binding(*uri);
  if (!base) return;

  std::vector<std::string> inclusive;
  for (const char* key : {"versionStartIncluding", "versionEndIncluding"}) {
    if (auto bound = string_field(match, {key})) inclusive.push_back(*bound);
  }
  if (base->version.is_any() && !inclusive.empty()) {
    for (const auto& version : inclusive) {
      CpeName exact = *base;
      exact.version = CpeComponent(version);
      out.insert(std::move(exact));
    }
  } else {
    out.insert(*base);
  }
}

void collect_node(const json& node, std::set<CpeName>& out) {
  if (node.is_string()) {
    add_match(node, out);
    return;
  }
  if (!node.is_object()) return;
  for (const char* key : {"cpe_match", "cpeMatch"}) {
    if (auto it = node.find(key); it != node.end() && it->is_array()) {
      for (const auto& m : *it) add_match(m, out);
    }
  }
  if (auto it = node.find("children"); it != node.end() && it->is_array()) {
    for (const auto& child : *it) collect_node(child, out);
  }
  if (auto it = node.find("nodes"); it != node.end() && it->is_array()) {
    for (const auto& child : *it) collect_node(child, out);
  }
}

std::string english_description(const json& cve) {
  auto desc = cve.find("description");
  if (desc == cve.end() || !desc->is_object()) return {};
  auto data = desc->find("description_data");
  if (data == desc->end() || !data->is_array()) return {};
  std::string fallback;
  for (const auto& entry : *data) {
    auto value = string_field(entry, {"value"});
    if (!value) continue;
    if (string_field(entry, {"lang"}).value_or("") == "en") return *value;
    if (fallback.empty()) fallback = *value;
  }
  return fallback;
}

std::vector<CvssScore> cvss_scores(const json& item) {
  std::vector<CvssScore> scores;
  auto impact = item.find("impact");
  if (impact == item.end() || !impact->is_object()) return scores;
  struct Source {
    const char* metric;
    const char* block;
    const char* default_version;
  };
  for (auto [metric, block, default_version] :
       {Source{"baseMetricV3", "cvssV3", "3.x"}, Source{"baseMetricV2", "cvssV2", "2.0"}}) {
    auto m = impact->find(metric);
    if (m == impact->end() || !m->is_object()) continue;
    auto b = m->find(block);
    if (b == m->end() || !b->is_object()) continue;
    auto score = b->find("baseScore");
    if (score == b->end() || !score->is_number()) continue;
    double value = score->get<double>();
    if (value < 0.0 || value > 10.0) continue;
    scores.push_back({string_field(*b, {"version"}).value_or(default_version), value});
  }
  return scores;
}

std::string cpes_to_json(const CpeSet& cpes) {
  json array = json::array();
  for (const auto& name : cpes) array.push_back(format_cpe_uri(name));
  return array.dump();
}

std::string ids_to_json(const CveIdSet& ids) { return json(ids).dump(); }

std::string now_iso8601() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

std::string posting_key(CpePart part, std::string_view vendor, std::string_view product) {
  std::string key(1, to_char(part));
  key.append(vendor);
  key.push_back(':');
  key.append(product);
  return key;
}

}  // namespace

std::optional<double> CveRecord::max_cvss() const {
  if (cvss_scores.empty()) return std::nullopt;
  double best = 0.0;
  for (const auto& s : cvss_scores) best = std::max(best, s.base_score);
  return best;
}

bool is_valid_cve_id(std::string_view id) noexcept {
  if (!id.starts_with("CVE-") || id.size() < 4 + 4 + 1 + 4) return false;
  auto digits = [](std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(),
                                     [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
  };
  auto year = id.substr(4, 4);
  if (!digits(year) || id[8] != '-') return false;
  auto seq = id.substr(9);
  return seq.size() >= 4 && digits(seq);
}

// ---------------------------------------------------------------------------
// DbSnapshot

DbSnapshot::DbSnapshot(std::uint64_t generation, std::vector<CveRecord> records,
                       std::span<const CpeName> dictionary)
    : generation_(generation),
      records_(std::move(records)),
      dictionary_size_(dictionary.size()),
      index_(build_generation_index(dictionary)) {
  by_id_.reserve(records_.size());
  for (std::uint32_t r = 0; r < records_.size(); ++r) {
    by_id_.emplace(records_[r].id, r);
    const auto& names = records_[r].applicability;
    for (std::uint32_t n = 0; n < names.size(); ++n) {
      postings_[posting_key(names[n].part, names[n].vendor.text(), names[n].product.text())]
          .push_back({r, n});
    }
  }
}

const CveRecord* DbSnapshot::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &records_[it->second];
}

void DbSnapshot::collect(const CpeName& query, std::string_view key, CveIdSet& out) const {
  auto it = postings_.find(std::string(key));
  if (it == postings_.end()) return;
  for (auto [r, n] : it->second) {
    const auto& record = records_[r];
    if (cpe_matches(query, record.applicability[n])) {
      if (out.insert(record.id).second) {
        spdlog::trace("match: {} ~ {} -> {}", format_cpe_uri(query),
                      format_cpe_uri(record.applicability[n]), record.id);
      }
    }
  }
}

CveIdSet DbSnapshot::match_cpes_to_cves(const CpeSet& cpes) const {
  CveIdSet out;
  for (const auto& query : cpes) {
    if (query.vendor.is_any() || query.product.is_any()) {
      // Wildcard queries cannot use the (vendor, product) index.
      for (const auto& record : records_) {
        for (const auto& name : record.applicability) {
          if (cpe_matches(query, name)) {
            out.insert(record.id);
            break;
          }
        }
      }
      continue;
    }
    auto vendor = query.vendor.text();
    auto product = query.product.text();
    collect(query, posting_key(query.part, vendor, product), out);
    collect(query, posting_key(query.part, vendor, ""), out);
    collect(query, posting_key(query.part, "", product), out);
    collect(query, posting_key(query.part, "", ""), out);
  }
  return out;
}

// ---------------------------------------------------------------------------
// VulnDb

VulnDb::VulnDb(const std::string& path) : conn_(std::make_unique<sqlite::Connection>(path)) {
  if (path != ":memory:") {
    conn_->exec("PRAGMA journal_mode=WAL;");
    conn_->exec("PRAGMA synchronous=NORMAL;");
  }
  create_schema();
  load_from_store();
}

VulnDb::~VulnDb() = default;

void VulnDb::create_schema() { conn_->exec(kSchema); }

std::uint64_t VulnDb::stored_generation() {
  auto stmt = conn_->prepare("SELECT value FROM meta WHERE key = 'generation'");
  if (!stmt.step()) return 0;
  return std::stoull(stmt.column_text(0));
}

// Caller holds conn_mutex_ (or is the constructor).
void VulnDb::load_from_store() {
  const std::uint64_t generation = stored_generation();

  std::vector<CveRecord> records;
  std::unordered_map<std::string, std::size_t> slot;
  {
    auto stmt = conn_->prepare("SELECT id, description, published FROM cve ORDER BY id");
    while (stmt.step()) {
      CveRecord r;
      r.id = stmt.column_text(0);
      r.description = stmt.column_text(1);
      r.published = stmt.column_text(2);
      slot.emplace(r.id, records.size());
      records.push_back(std::move(r));
    }
  }
  {
    auto stmt = conn_->prepare("SELECT cve_id, version, score FROM cve_cvss ORDER BY cve_id, version");
    while (stmt.step()) {
      auto it = slot.find(stmt.column_text(0));
      if (it != slot.end()) {
        records[it->second].cvss_scores.push_back({stmt.column_text(1), stmt.column_double(2)});
      }
    }
  }
  {
    auto stmt = conn_->prepare("SELECT cve_id, uri FROM cve_cpe ORDER BY cve_id, uri");
    while (stmt.step()) {
      auto it = slot.find(stmt.column_text(0));
      if (it != slot.end()) records[it->second].applicability.push_back(parse_cpe_uri(stmt.column_text(1)));
    }
  }
  {
    auto stmt = conn_->prepare("SELECT DISTINCT cve_id FROM exploit_link");
    while (stmt.step()) {
      auto it = slot.find(stmt.column_text(0));
      if (it != slot.end()) records[it->second].exploit_available = true;
    }
  }
  std::vector<CpeName> dictionary;
  {
    auto stmt = conn_->prepare("SELECT uri FROM cpe_dict ORDER BY uri");
    while (stmt.step()) dictionary.push_back(parse_cpe_uri(stmt.column_text(0)));
  }

  auto snapshot = std::make_shared<const DbSnapshot>(generation, std::move(records), dictionary);

  std::unordered_map<Digest, PvcCacheEntry, DigestHash> cache;
  {
    auto stmt = conn_->prepare("SELECT fingerprint, cve_ids, cpes FROM cache WHERE generation = ?");
    stmt.bind(1, static_cast<std::int64_t>(generation));
    while (stmt.step()) {
      auto blob = stmt.column_blob(0);
      if (blob.size() != Digest{}.size()) continue;
      PvcCacheEntry entry;
      std::copy(blob.begin(), blob.end(), entry.fingerprint.begin());
      entry.generation = generation;
      entry.cve_ids = json::parse(stmt.column_text(1)).get<CveIdSet>();
      for (const auto& uri : json::parse(stmt.column_text(2))) {
        entry.generated_cpes.insert(parse_cpe_uri(uri.get<std::string>()));
      }
      cache.emplace(entry.fingerprint, std::move(entry));
    }
  }

  {
    std::unique_lock cache_lock(cache_mutex_);
    std::lock_guard snap_lock(snapshot_mutex_);
    snapshot_ = std::move(snapshot);
    generation_.store(generation);
    cache_ = std::move(cache);
  }
}

std::shared_ptr<const DbSnapshot> VulnDb::snapshot() const {
  std::lock_guard lock(snapshot_mutex_);
  return snapshot_;
}

VulnDb::UpdateTransaction VulnDb::begin_update() { return UpdateTransaction(*this); }

bool VulnDb::refresh() {
  std::lock_guard lock(conn_mutex_);
  if (stored_generation() <= generation_.load()) return false;
  load_from_store();
  return true;
}

std::optional<PvcCacheEntry> VulnDb::cache_lookup(const Digest& fingerprint) const {
  return cache_lookup(fingerprint, generation_.load());
}

std::optional<PvcCacheEntry> VulnDb::cache_lookup(const Digest& fingerprint,
                                                  std::uint64_t generation) const {
  std::shared_lock lock(cache_mutex_);
  auto it = cache_.find(fingerprint);
  if (it == cache_.end() || it->second.generation != generation) return std::nullopt;
  return it->second;
}

void VulnDb::cache_store(const PvcCacheEntry& entry) {
  {
    std::unique_lock lock(cache_mutex_);
    if (entry.generation != generation_.load()) {
      throw StaleGenerationError("cache entry generation " + std::to_string(entry.generation) +
                                 " is not current (" + std::to_string(generation_.load()) + ")");
    }
    cache_[entry.fingerprint] = entry;
  }
  std::lock_guard lock(conn_mutex_);
  auto stmt = conn_->prepare(
      "INSERT OR REPLACE INTO cache (fingerprint, generation, cve_ids, cpes) VALUES (?, ?, ?, ?)");
  stmt.bind_blob(1, entry.fingerprint)
      .bind(2, static_cast<std::int64_t>(entry.generation))
      .bind(3, ids_to_json(entry.cve_ids))
      .bind(4, cpes_to_json(entry.generated_cpes));
  stmt.exec();
}

std::size_t VulnDb::cache_size() const {
  std::shared_lock lock(cache_mutex_);
  return cache_.size();
}

// ---------------------------------------------------------------------------
// UpdateTransaction

VulnDb::UpdateTransaction::UpdateTransaction(VulnDb& db) : db_(&db), lock_(db.conn_mutex_) {
  db_->conn_->exec("BEGIN IMMEDIATE");
  active_ = true;
}

VulnDb::UpdateTransaction::UpdateTransaction(UpdateTransaction&& other) noexcept
    : db_(other.db_), lock_(std::move(other.lock_)), active_(std::exchange(other.active_, false)) {}

VulnDb::UpdateTransaction::~UpdateTransaction() {
  if (!active_) return;
  try {
    rollback();
  } catch (const std::exception& e) {
    spdlog::error("update rollback failed: {}", e.what());
  }
}

void VulnDb::UpdateTransaction::rollback() {
  if (!active_) return;
  active_ = false;
  db_->conn_->exec("ROLLBACK");
  if (lock_.owns_lock()) lock_.unlock();
}

IngestStats VulnDb::UpdateTransaction::ingest_nvd_feed(const std::filesystem::path& path) {
  return ingest_nvd_feed_text(read_file(path));
}

IngestStats VulnDb::UpdateTransaction::ingest_cpe_dictionary(const std::filesystem::path& path) {
  return ingest_cpe_dictionary_text(read_file(path));
}

IngestStats VulnDb::UpdateTransaction::ingest_exploit_map(const std::filesystem::path& path) {
  return ingest_exploit_map_text(read_file(path));
}

IngestStats VulnDb::UpdateTransaction::ingest_nvd_feed_text(std::string_view text) {
  if (!active_) throw IngestError("update transaction is closed");
  json feed;
  try {
    feed = json::parse(text);
  } catch (const json::parse_error& e) {
    throw IngestError(std::string("NVD feed is not valid JSON: ") + e.what());
  }
  auto items = feed.find("CVE_Items");
  if (!feed.is_object() || items == feed.end() || !items->is_array()) {
    throw IngestError("NVD feed has no CVE_Items array");
  }

  auto& conn = *db_->conn_;
  auto del_cpe = conn.prepare("DELETE FROM cve_cpe WHERE cve_id = ?");
  auto del_cvss = conn.prepare("DELETE FROM cve_cvss WHERE cve_id = ?");
  auto put_cve = conn.prepare("INSERT OR REPLACE INTO cve (id, description, published) VALUES (?, ?, ?)");
  auto put_cpe = conn.prepare("INSERT OR IGNORE INTO cve_cpe (cve_id, uri) VALUES (?, ?)");
  auto put_cvss =
      conn.prepare("INSERT OR REPLACE INTO cve_cvss (cve_id, version, score) VALUES (?, ?, ?)");

  IngestStats stats;
  for (const auto& item : *items) {
    std::optional<std::string> id;
    if (item.is_object()) {
      if (auto cve = item.find("cve"); cve != item.end() && cve->is_object()) {
        if (auto meta = cve->find("CVE_data_meta"); meta != cve->end() && meta->is_object()) {
          id = string_field(*meta, {"ID"});
        }
      }
    }
    if (!id || !is_valid_cve_id(*id)) {
      spdlog::warn("ingest: skipping NVD item without a valid CVE id");
      ++stats.skipped;
      continue;
    }

    std::set<CpeName> applicability;
    if (auto cfg = item.find("configurations"); cfg != item.end()) {
      if (cfg->is_array()) {
        for (const auto& node : *cfg) collect_node(node, applicability);
      } else {
        collect_node(*cfg, applicability);
      }
    }

    del_cpe.bind(1, *id).exec();
    del_cvss.bind(1, *id).exec();
    put_cve.bind(1, *id)
        .bind(2, english_description(item.at("cve")))
        .bind(3, string_field(item, {"publishedDate"}).value_or(""))
        .exec();
    for (const auto& name : applicability) put_cpe.bind(1, *id).bind(2, format_cpe_uri(name)).exec();
    for (const auto& score : cvss_scores(item)) {
      put_cvss.bind(1, *id).bind(2, score.version).bind(3, score.base_score).exec();
    }
    ++stats.upserted;
  }
  return stats;
}

IngestStats VulnDb::UpdateTransaction::ingest_cpe_dictionary_text(std::string_view text) {
  if (!active_) throw IngestError("update transaction is closed");
  auto put = db_->conn_->prepare("INSERT OR IGNORE INTO cpe_dict (uri) VALUES (?)");
  IngestStats stats;
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto eol = text.find('\n');
    auto line = trim(text.substr(0, eol));
    text = eol == std::string_view::npos ? std::string_view() : text.substr(eol + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    auto name = parse_any_binding(line);
    if (!name) {
      spdlog::warn("ingest: dictionary line {} skipped", line_no);
      ++stats.skipped;
      continue;
    }
    put.bind(1, format_cpe_uri(*name)).exec();
    ++stats.upserted;
  }
  return stats;
}

IngestStats VulnDb::UpdateTransaction::ingest_exploit_map_text(std::string_view text) {
  if (!active_) throw IngestError("update transaction is closed");
  auto put = db_->conn_->prepare("INSERT OR IGNORE INTO exploit_link (exploit_id, cve_id) VALUES (?, ?)");
  IngestStats stats;
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto eol = text.find('\n');
    auto line = trim(text.substr(0, eol));
    text = eol == std::string_view::npos ? std::string_view() : text.substr(eol + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    auto comma = line.find(',');
    auto exploit = trim(line.substr(0, comma));
    auto cve = comma == std::string_view::npos ? std::string_view() : trim(line.substr(comma + 1));
    if (line_no == 1 && exploit == "exploit_id") continue;
    if (exploit.empty() || !is_valid_cve_id(cve)) {
      spdlog::warn("ingest: exploit map line {} skipped", line_no);
      ++stats.skipped;
      continue;
    }
    put.bind(1, exploit).bind(2, cve).exec();
    ++stats.upserted;
  }
  return stats;
}

std::uint64_t VulnDb::UpdateTransaction::commit() {
  if (!active_) throw IngestError("update transaction is closed");
  auto& conn = *db_->conn_;
  const std::uint64_t next = db_->stored_generation() + 1;
  conn.prepare("UPDATE meta SET value = ? WHERE key = 'generation'").bind(1, std::to_string(next)).exec();
  conn.prepare("INSERT OR REPLACE INTO meta (key, value) VALUES ('updated_at', ?)")
      .bind(1, now_iso8601())
      .exec();
  conn.prepare("DELETE FROM cache WHERE generation < ?").bind(1, static_cast<std::int64_t>(next)).exec();
  conn.exec("COMMIT");
  active_ = false;
  db_->load_from_store();
  lock_.unlock();
  spdlog::info("database generation {} committed", next);
  return next;
}

}  // namespace vulnscan
