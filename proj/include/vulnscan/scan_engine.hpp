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

#include <chrono>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "vulnscan/cpe.hpp"
#include "vulnscan/pvc.hpp"
#include "vulnscan/vuln_db.hpp"

namespace vulnscan {

class DatabaseNotInitializedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PvcScanResult {
  Pvc pvc;
  CpeSet generated_cpes;
  CveIdSet cve_ids;
  bool cache_hit = false;
  std::chrono::nanoseconds elapsed{0};
  /// Set when this PVC could not be scanned; siblings are unaffected.
  std::optional<std::string> error;
};

/// Per-CVE facts a report needs beyond the id.
struct CveDetail {
  std::optional<double> cvss;
  bool exploit = false;

  bool operator==(const CveDetail&) const = default;
};

struct ReportSummary {
  std::size_t total_cves = 0;  // deduplicated across PVCs
  std::optional<double> max_cvss;
  std::size_t exploitable = 0;

  bool operator==(const ReportSummary&) const = default;
};

struct ScanReport {
  std::string token;
  std::vector<PvcScanResult> results;
  std::map<std::string, CveDetail> cves;

  /// Recomputed from results and cves.
  ReportSummary summary() const;
};

/// {token, results:[{pvc, cpes:[uri], cves:[{id, cvss?, exploit}], cache_hit}], summary}
nlohmann::json report_to_json(const ScanReport& report);
ScanReport report_from_json(const nlohmann::json& document);

/// |found ∩ actual| / |actual| * 100. Throws std::invalid_argument when
/// actual is empty.
double compute_accuracy(const CveIdSet& found, const CveIdSet& actual);

/// Runs CPE generation and matching per PVC, consulting and filling the
/// per-PVC result cache.
class ScanEngine {
 public:
  ScanEngine(VulnDb& db, std::size_t pvc_concurrency_cap);

  std::size_t concurrency_cap() const noexcept { return cap_; }

  /// Scans against the current snapshot.
  PvcScanResult scan_pvc(const Pvc& pvc) const;
  /// Scans against a pinned snapshot; cache entries of other generations are ignored.
  PvcScanResult scan_pvc(const Pvc& pvc, const DbSnapshot& snapshot) const;

  /// Scans every PVC with at most concurrency_cap() in flight. Results keep
  /// inventory order. The whole job uses one snapshot.
  ScanReport execute_job(std::string token, const Inventory& inventory) const;

 private:
  VulnDb& db_;
  std::size_t cap_;
};

}  // namespace vulnscan
