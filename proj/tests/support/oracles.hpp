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

// Independent reference implementations used to check the library. They are
// deliberately naive: nested loops, string splitting, no indexes.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vulnscan/cpe.hpp"
#include "vulnscan/generation.hpp"
#include "vulnscan/vuln_db.hpp"

namespace oracle {

using vulnscan::CpeComponent;
using vulnscan::CpeName;
using vulnscan::CpeSet;
using vulnscan::CveIdSet;
using vulnscan::CveRecord;

inline bool literal_component(const CpeComponent& a, const CpeComponent& b) {
  if (a.is_any() || b.is_any()) return true;
  return a.text() == b.text();
}

inline bool literal_match(const CpeName& generated, const CpeName& applicability) {
  if (generated.part != applicability.part) return false;
  return literal_component(generated.vendor, applicability.vendor) &&
         literal_component(generated.product, applicability.product) &&
         literal_component(generated.version, applicability.version) &&
         literal_component(generated.update, applicability.update) &&
         literal_component(generated.edition, applicability.edition) &&
         literal_component(generated.language, applicability.language);
}

/// All pairs of (generated name, applicability name).
inline CveIdSet brute_force_match(const std::vector<CveRecord>& records, const CpeSet& cpes) {
  CveIdSet out;
  for (const auto& record : records) {
    bool hit = false;
    for (const auto& applicability : record.applicability) {
      for (const auto& generated : cpes) {
        if (literal_match(generated, applicability)) {
          hit = true;
          break;
        }
      }
      if (hit) break;
    }
    if (hit) out.insert(record.id);
  }
  return out;
}

/// Counts iterations of the seven nested loops, with an empty optional set
/// iterated once as a wildcard.
inline std::size_t nested_loop_count(const vulnscan::ComponentCandidates& c) {
  const std::set<std::string> wildcard = {""};
  const auto& u = c.updates.empty() ? wildcard : c.updates;
  const auto& e = c.editions.empty() ? wildcard : c.editions;
  const auto& l = c.languages.empty() ? wildcard : c.languages;
  std::size_t n = 0;
  for ([[maybe_unused]] auto p : c.platforms)
    for ([[maybe_unused]] const auto& v : c.vendors)
      for ([[maybe_unused]] const auto& pr : c.products)
        for ([[maybe_unused]] const auto& vr : c.versions)
          for ([[maybe_unused]] const auto& uu : u)
            for ([[maybe_unused]] const auto& ee : e)
              for ([[maybe_unused]] const auto& ll : l) ++n;
  return n;
}

inline std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::string current;
  for (char ch : text) {
    if (ch == sep) {
      out.push_back(current);
      current.clear();
    } else {
      current.push_back(ch);
    }
  }
  out.push_back(current);
  return out;
}

/// Distinct (lowercased) product fields in a one-URI-per-line dictionary.
inline std::size_t distinct_product_count(std::string_view dictionary) {
  std::set<std::string> products;
  for (auto line : split(dictionary, '\n')) {
    if (line.empty() || line[0] == '#') continue;
    auto parts = split(line, ':');  // "cpe", "/a", vendor, product, ...
    if (parts.size() < 4 || parts[3].empty()) continue;
    std::string p;
    for (char ch : parts[3]) p.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    products.insert(p);
  }
  return products.size();
}

/// CVE ids present in both the feed id list and the exploit CSV.
inline std::set<std::string> exploit_join(const std::set<std::string>& feed_ids, std::string_view csv) {
  std::set<std::string> out;
  for (auto line : split(csv, '\n')) {
    auto cols = split(line, ',');
    if (cols.size() != 2) continue;
    if (feed_ids.count(cols[1])) out.insert(cols[1]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fixture builders

/// Minimal NVD 1.1-shaped feed for the given records.
inline nlohmann::json nvd_feed(const std::vector<CveRecord>& records) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& r : records) {
    nlohmann::json item;
    item["cve"]["CVE_data_meta"]["ID"] = r.id;
    item["cve"]["description"]["description_data"] =
        nlohmann::json::array({{{"lang", "en"}, {"value", r.description}}});
    nlohmann::json matches = nlohmann::json::array();
    for (const auto& name : r.applicability) {
      matches.push_back({{"vulnerable", true}, {"cpe22Uri", vulnscan::format_cpe_uri(name)}});
    }
    item["configurations"]["nodes"] =
        nlohmann::json::array({{{"operator", "OR"}, {"cpe_match", matches}}});
    item["impact"] = nlohmann::json::object();
    for (const auto& s : r.cvss_scores) {
      if (s.version.starts_with("3")) {
        item["impact"]["baseMetricV3"]["cvssV3"] = {{"version", s.version}, {"baseScore", s.base_score}};
      } else {
        item["impact"]["baseMetricV2"]["cvssV2"] = {{"version", s.version}, {"baseScore", s.base_score}};
      }
    }
    items.push_back(std::move(item));
  }
  return {{"CVE_data_type", "CVE"}, {"CVE_Items", items}};
}

/// Random CVE records and query names over small vocabularies so that
/// matches are frequent. Query names sometimes carry ANY vendor/product.
struct RandomFixture {
  std::vector<CveRecord> records;
  CpeSet queries;
};

inline CpeComponent maybe_any(std::mt19937& rng, double any_probability, const std::string& value) {
  std::bernoulli_distribution any(any_probability);
  return any(rng) ? CpeComponent::any() : CpeComponent(value);
}

inline RandomFixture random_fixture(unsigned seed, std::size_t cve_count, std::size_t query_count) {
  std::mt19937 rng(seed);
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  const char parts[] = {'a', 'o', 'h'};
  auto vendor = [&] { return "v" + std::to_string(pick(25)); };
  auto product = [&] { return "p" + std::to_string(pick(60)); };
  auto version = [&] { return std::to_string(pick(4)) + "." + std::to_string(pick(5)); };
  auto update = [&] { return "u" + std::to_string(pick(3)); };

  auto random_name = [&](double any_vp, double any_rest) {
    CpeName n;
    n.part = *vulnscan::cpe_part_from_char(parts[pick(3)]);
    n.vendor = maybe_any(rng, any_vp, vendor());
    n.product = maybe_any(rng, any_vp, product());
    n.version = maybe_any(rng, any_rest, version());
    n.update = maybe_any(rng, 0.7, update());
    n.edition = maybe_any(rng, 0.9, "e" + std::to_string(pick(2)));
    n.language = maybe_any(rng, 0.9, "l" + std::to_string(pick(2)));
    return n;
  };

  RandomFixture f;
  for (std::size_t i = 0; i < cve_count; ++i) {
    CveRecord r;
    r.id = "CVE-2020-" + std::to_string(10000 + i);
    auto names = pick(4);  // 0..3; zero means a CVE without CPE entries
    for (std::size_t k = 0; k < names; ++k) r.applicability.push_back(random_name(0.03, 0.4));
    f.records.push_back(std::move(r));
  }
  while (f.queries.size() < query_count) f.queries.insert(random_name(0.05, 0.2));
  return f;
}

// ---------------------------------------------------------------------------

/// Temporary directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string pattern = (std::filesystem::temp_directory_path() / "vulnscan-XXXXXX").string();
    path_ = ::mkdtemp(pattern.data());
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path write(const std::string& name, std::string_view content) const {
    auto p = path_ / name;
    std::ofstream(p, std::ios::binary) << content;
    return p;
  }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace oracle
