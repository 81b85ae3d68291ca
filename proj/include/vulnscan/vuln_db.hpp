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

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vulnscan/cpe.hpp"
#include "vulnscan/crypto.hpp"
#include "vulnscan/generation.hpp"

namespace vulnscan {

namespace sqlite {
class Connection;
}

class IngestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// cache_store called with an entry from a superseded generation.
class StaleGenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using CveIdSet = std::set<std::string>;

struct CvssScore {
  std::string version;  // e.g. "3.1", "2.0"
  double base_score = 0.0;

  auto operator<=>(const CvssScore&) const = default;
};

struct CveRecord {
  std::string id;
  std::string description;
  std::vector<CvssScore> cvss_scores;  // may be empty
  std::vector<CpeName> applicability;  // may be empty; such a CVE never matches
  bool exploit_available = false;
  std::string published;

  std::optional<double> max_cvss() const;
  bool operator==(const CveRecord&) const = default;
};

/// CVE-YYYY-NNNN with at least four trailing digits.
bool is_valid_cve_id(std::string_view id) noexcept;

struct IngestStats {
  std::size_t upserted = 0;
  std::size_t skipped = 0;
};

struct PvcCacheEntry {
  Digest fingerprint{};
  std::uint64_t generation = 0;
  CveIdSet cve_ids;
  CpeSet generated_cpes;

  bool operator==(const PvcCacheEntry&) const = default;
};

/// Immutable view of one database generation: CVE records, the CPE
/// dictionary's generation index and a (part, vendor, product) inverted
/// index over applicability names.
class DbSnapshot {
 public:
  DbSnapshot(std::uint64_t generation, std::vector<CveRecord> records,
             std::span<const CpeName> dictionary);

  std::uint64_t generation() const noexcept { return generation_; }
  const GenerationIndex& index() const noexcept { return index_; }
  const std::vector<CveRecord>& records() const noexcept { return records_; }
  std::size_t dictionary_size() const noexcept { return dictionary_size_; }
  const CveRecord* find(std::string_view id) const;

  /// Ids of every CVE with an applicability name matching any input name.
  CveIdSet match_cpes_to_cves(const CpeSet& cpes) const;

 private:
  struct Posting {
    std::uint32_t record;
    std::uint32_t name;
  };

  void collect(const CpeName& query, std::string_view key, CveIdSet& out) const;

  std::uint64_t generation_;
  std::vector<CveRecord> records_;
  std::size_t dictionary_size_;
  GenerationIndex index_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
};

struct DigestHash {
  std::size_t operator()(const Digest& d) const noexcept {
    std::size_t h = 0;
    for (std::size_t i = 0; i < sizeof(h); ++i) h = (h << 8) | d[i];
    return h;
  }
};

/// Persistent CVE store. Readers work on immutable snapshots; an
/// UpdateTransaction is exclusive and publishes a new snapshot and
/// generation atomically on commit.
class VulnDb {
 public:
  /// ":memory:" opens a private in-memory database.
  explicit VulnDb(const std::string& path);
  ~VulnDb();
  VulnDb(const VulnDb&) = delete;
  VulnDb& operator=(const VulnDb&) = delete;

  class UpdateTransaction {
   public:
    UpdateTransaction(UpdateTransaction&&) noexcept;
    UpdateTransaction& operator=(UpdateTransaction&&) = delete;
    ~UpdateTransaction();

    IngestStats ingest_nvd_feed(const std::filesystem::path& path);
    IngestStats ingest_cpe_dictionary(const std::filesystem::path& path);
    IngestStats ingest_exploit_map(const std::filesystem::path& path);

    // In-memory variants of the above, for callers that already hold the text.
    IngestStats ingest_nvd_feed_text(std::string_view text);
    IngestStats ingest_cpe_dictionary_text(std::string_view text);
    IngestStats ingest_exploit_map_text(std::string_view text);

    /// Bumps the generation, purges stale cache entries, publishes the new
    /// snapshot. Returns the new generation.
    std::uint64_t commit();
    /// Discards everything ingested so far. Also done by the destructor.
    void rollback();

   private:
    friend class VulnDb;
    explicit UpdateTransaction(VulnDb& db);
    VulnDb* db_;
    std::unique_lock<std::mutex> lock_;
    bool active_ = false;
  };

  UpdateTransaction begin_update();

  std::shared_ptr<const DbSnapshot> snapshot() const;
  std::uint64_t generation() const noexcept { return generation_.load(); }

  GenerationIndex build_generation_index() const { return snapshot()->index(); }
  CveIdSet match_cpes_to_cves(const CpeSet& cpes) const {
    return snapshot()->match_cpes_to_cves(cpes);
  }

  /// Entry for the current generation, if any.
  std::optional<PvcCacheEntry> cache_lookup(const Digest& fingerprint) const;
  /// Entry for a specific generation, for scans pinned to an older snapshot.
  std::optional<PvcCacheEntry> cache_lookup(const Digest& fingerprint,
                                            std::uint64_t generation) const;
  /// Throws StaleGenerationError unless entry.generation is current.
  void cache_store(const PvcCacheEntry& entry);
  std::size_t cache_size() const;

  /// Picks up a generation committed by another process on the same file.
  /// Returns true when a newer snapshot was loaded.
  bool refresh();

 private:
  void create_schema();
  void load_from_store();
  std::uint64_t stored_generation();

  std::unique_ptr<sqlite::Connection> conn_;
  mutable std::mutex conn_mutex_;

  mutable std::mutex snapshot_mutex_;
  std::shared_ptr<const DbSnapshot> snapshot_;
  std::atomic<std::uint64_t> generation_{0};

  mutable std::shared_mutex cache_mutex_;
  std::unordered_map<Digest, PvcCacheEntry, DigestHash> cache_;
};

}  // namespace vulnscan
