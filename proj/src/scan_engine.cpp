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

#include "vulnscan/scan_engine.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

#include <spdlog/spdlog.h>

namespace vulnscan {

using json = nlohmann::json;

ReportSummary ScanReport::summary() const {
  ReportSummary s;
  CveIdSet all;
  for (const auto& r : results) all.insert(r.cve_ids.begin(), r.cve_ids.end());
  s.total_cves = all.size();
  for (const auto& id : all) {
    auto it = cves.find(id);
    if (it == cves.end()) continue;
    if (it->second.exploit) ++s.exploitable;
    if (it->second.cvss && (!s.max_cvss || *it->second.cvss > *s.max_cvss)) s.max_cvss = it->second.cvss;
  }
  return s;
}

json report_to_json(const ScanReport& report) {
  json results = json::array();
  for (const auto& r : report.results) {
    json cpes = json::array();
    for (const auto& name : r.generated_cpes) cpes.push_back(format_cpe_uri(name));
    json cves = json::array();
    for (const auto& id : r.cve_ids) {
      json cve{{"id", id}, {"exploit", false}};
      if (auto it = report.cves.find(id); it != report.cves.end()) {
        if (it->second.cvss) cve["cvss"] = *it->second.cvss;
        cve["exploit"] = it->second.exploit;
      }
      cves.push_back(std::move(cve));
    }
    json entry{{"pvc", pvc_to_json(r.pvc)},
               {"cpes", std::move(cpes)},
               {"cves", std::move(cves)},
               {"cache_hit", r.cache_hit}};
    if (r.error) entry["error"] = *r.error;
    results.push_back(std::move(entry));
  }
  auto s = report.summary();
  json summary{{"total_cves", s.total_cves}, {"exploitable", s.exploitable}};
  if (s.max_cvss) summary["max_cvss"] = *s.max_cvss;
  return json{{"token", report.token}, {"results", std::move(results)}, {"summary", std::move(summary)}};
}

ScanReport report_from_json(const json& document) {
  ScanReport report;
  report.token = document.at("token").get<std::string>();
  for (const auto& entry : document.at("results")) {
    PvcScanResult r;
    r.pvc = pvc_from_json(entry.at("pvc"));
    for (const auto& uri : entry.at("cpes")) r.generated_cpes.insert(parse_cpe_uri(uri.get<std::string>()));
    for (const auto& cve : entry.at("cves")) {
      auto id = cve.at("id").get<std::string>();
      CveDetail detail;
      if (auto it = cve.find("cvss"); it != cve.end() && it->is_number()) detail.cvss = it->get<double>();
      detail.exploit = cve.value("exploit", false);
      report.cves[id] = detail;
      r.cve_ids.insert(std::move(id));
    }
    r.cache_hit = entry.value("cache_hit", false);
    if (auto it = entry.find("error"); it != entry.end() && it->is_string()) r.error = it->get<std::string>();
    report.results.push_back(std::move(r));
  }
  return report;
}

double compute_accuracy(const CveIdSet& found, const CveIdSet& actual) {
  if (actual.empty()) throw std::invalid_argument("accuracy is undefined for an empty actual set");
  std::size_t hits = 0;
  for (const auto& id : found) hits += actual.contains(id) ? 1 : 0;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(actual.size());
}

ScanEngine::ScanEngine(VulnDb& db, std::size_t pvc_concurrency_cap)
    : db_(db), cap_(std::max<std::size_t>(1, pvc_concurrency_cap)) {}

PvcScanResult ScanEngine::scan_pvc(const Pvc& pvc) const { return scan_pvc(pvc, *db_.snapshot()); }

PvcScanResult ScanEngine::scan_pvc(const Pvc& pvc, const DbSnapshot& snapshot) const {
  if (snapshot.generation() < 1) {
    throw DatabaseNotInitializedError("vulnerability database has not been updated yet");
  }
  const auto start = std::chrono::steady_clock::now();
  PvcScanResult result;
  result.pvc = pvc;

  const auto fingerprint = fingerprint_pvc(pvc);
  if (auto hit = db_.cache_lookup(fingerprint, snapshot.generation())) {
    result.generated_cpes = std::move(hit->generated_cpes);
    result.cve_ids = std::move(hit->cve_ids);
    result.cache_hit = true;
  } else {
    result.generated_cpes = generate_cpes(pvc, snapshot.index());
    result.cve_ids = snapshot.match_cpes_to_cves(result.generated_cpes);
    try {
      db_.cache_store({fingerprint, snapshot.generation(), result.cve_ids, result.generated_cpes});
    } catch (const StaleGenerationError&) {
      // An update landed mid-job; the result stands, it just isn't cached.
      spdlog::debug("scan: not caching '{}' from superseded generation {}", pvc.name,
                    snapshot.generation());
    }
  }
  result.elapsed = std::chrono::steady_clock::now() - start;
  return result;
}

ScanReport ScanEngine::execute_job(std::string token, const Inventory& inventory) const {
  const auto snapshot = db_.snapshot();
  if (snapshot->generation() < 1) {
    throw DatabaseNotInitializedError("vulnerability database has not been updated yet");
  }
  ScanReport report;
  report.token = std::move(token);
  report.results.resize(inventory.pvcs.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < inventory.pvcs.size(); i = next.fetch_add(1)) {
      try {
        report.results[i] = scan_pvc(inventory.pvcs[i], *snapshot);
      } catch (const std::exception& e) {
        spdlog::warn("scan: PVC '{}' failed: {}", inventory.pvcs[i].name, e.what());
        report.results[i].pvc = inventory.pvcs[i];
        report.results[i].error = e.what();
      }
    }
  };

  const std::size_t threads = std::min(cap_, inventory.pvcs.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  for (const auto& r : report.results) {
    for (const auto& id : r.cve_ids) {
      if (report.cves.contains(id)) continue;
      CveDetail detail;
      if (const auto* record = snapshot->find(id)) {
        detail.cvss = record->max_cvss();
        detail.exploit = record->exploit_available;
      }
      report.cves.emplace(id, detail);
    }
  }
  return report;
}

}  // namespace vulnscan
