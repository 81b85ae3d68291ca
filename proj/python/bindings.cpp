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

#include <algorithm>
#include <memory>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "vulnscan/generation.hpp"
#include "vulnscan/pvc.hpp"
#include "vulnscan/scan_engine.hpp"
#include "vulnscan/server.hpp"
#include "vulnscan/vuln_db.hpp"

namespace py = pybind11;
using namespace vulnscan;

namespace {

std::vector<std::string> uris(const CpeSet& names) {
  std::vector<std::string> out;
  for (const auto& n : names) out.push_back(format_cpe_uri(n));
  return out;
}

CpeSet parse_all(const std::vector<std::string>& texts) {
  CpeSet out;
  for (const auto& t : texts) out.insert(parse_cpe_uri(t));
  return out;
}

// JSON crosses the boundary as text; the Python layer wraps it in dicts.
class Database {
 public:
  explicit Database(const std::string& path, std::size_t concurrency)
      : db_(path), engine_(db_, concurrency) {}

  std::uint64_t update(const std::string& directory) {
    auto sources = discover_update_sources(directory);
    auto tx = db_.begin_update();
    for (const auto& p : sources.cpe_dictionaries) tx.ingest_cpe_dictionary(p);
    for (const auto& p : sources.nvd_feeds) tx.ingest_nvd_feed(p);
    for (const auto& p : sources.exploit_maps) tx.ingest_exploit_map(p);
    return tx.commit();
  }

  std::vector<std::string> match(const std::vector<std::string>& cpes) const {
    auto ids = db_.match_cpes_to_cves(parse_all(cpes));
    return {ids.begin(), ids.end()};
  }

  std::vector<std::string> generate(const std::string& pvc_json) const {
    return uris(generate_cpes(pvc_from_json(nlohmann::json::parse(pvc_json)), db_.build_generation_index()));
  }

  std::string scan(const std::string& inventory_json, const std::string& token) const {
    auto inventory = inventory_from_json(nlohmann::json::parse(inventory_json));
    return report_to_json(engine_.execute_job(token, inventory)).dump();
  }

  std::uint64_t generation() const { return db_.generation(); }
  std::size_t cve_count() const { return db_.snapshot()->records().size(); }

 private:
  VulnDb db_;
  ScanEngine engine_;
};

}  // namespace

PYBIND11_MODULE(_vulnscan, m) {
  m.doc() = "Software inventory to CVE correlation";

  py::register_exception<InventoryError>(m, "InventoryError", PyExc_ValueError);
  py::register_exception<IngestError>(m, "IngestError", PyExc_RuntimeError);

  m.def("normalize_token", &normalize_token, py::arg("raw"));
  m.def(
      "canonical_cpe", [](const std::string& uri) { return format_cpe_uri(parse_cpe_uri(uri)); }, py::arg("uri"));
  m.def(
      "cpe_matches",
      [](const std::string& generated, const std::string& applicability) {
        return cpe_matches(parse_cpe_uri(generated), parse_cpe_uri(applicability));
      },
      py::arg("generated"), py::arg("applicability"));
  m.def(
      "generate_cpes",
      [](const std::string& pvc_json, const std::vector<std::string>& dictionary) {
        std::vector<CpeName> names;
        for (const auto& d : dictionary) names.push_back(parse_cpe_uri(d));
        return uris(generate_cpes(pvc_from_json(nlohmann::json::parse(pvc_json)), build_generation_index(names)));
      },
      py::arg("pvc_json"), py::arg("dictionary") = std::vector<std::string>{});
  m.def(
      "fingerprint",
      [](const std::string& pvc_json) { return to_hex(fingerprint_pvc(pvc_from_json(nlohmann::json::parse(pvc_json)))); },
      py::arg("pvc_json"));
  m.def(
      "compute_accuracy",
      [](const std::vector<std::string>& found, const std::vector<std::string>& actual) {
        return compute_accuracy({found.begin(), found.end()}, {actual.begin(), actual.end()});
      },
      py::arg("found"), py::arg("actual"));

  py::class_<Database>(m, "Database")
      .def(py::init<const std::string&, std::size_t>(), py::arg("path") = ":memory:", py::arg("concurrency") = 4)
      .def("update", &Database::update, py::arg("directory"), py::call_guard<py::gil_scoped_release>())
      .def("match", &Database::match, py::arg("cpes"))
      .def("generate", &Database::generate, py::arg("pvc_json"))
      .def("scan", &Database::scan, py::arg("inventory_json"), py::arg("token") = "local",
           py::call_guard<py::gil_scoped_release>())
      .def_property_readonly("generation", &Database::generation)
      .def_property_readonly("cve_count", &Database::cve_count);
}
