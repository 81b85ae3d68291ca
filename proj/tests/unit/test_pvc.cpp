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

#include <doctest.h>

#include "oracles.hpp"
#include "vulnscan/pvc.hpp"

using namespace vulnscan;
using nlohmann::json;

TEST_SUITE("pvc") {

TEST_CASE("load an inventory with one application") {
  oracle::TempDir dir;
  auto path = dir.write("inv.json", R"({"target_label":"desk","pvcs":[
      {"kind":"app","name":"Adobe Reader","publisher":"Adobe","display_version":"9.0"}]})");
  auto inv = load_inventory(path);
  CHECK(inv.target_label == "desk");
  REQUIRE(inv.pvcs.size() == 1);
  CHECK(inv.pvcs[0].kind == PvcKind::Application);
  CHECK(inv.pvcs[0].name == "Adobe Reader");
  CHECK(inv.pvcs[0].publisher == "Adobe");
  CHECK(inv.pvcs[0].display_version == "9.0");
  CHECK_FALSE(inv.pvcs[0].vendor);
}

TEST_CASE("empty list") {
  auto inv = inventory_from_json(json{{"pvcs", json::array()}});
  CHECK(inv.pvcs.empty());
}

TEST_CASE("required name") {
  CHECK_THROWS_AS(pvc_from_json(json{{"kind", "app"}, {"name", ""}}), InventoryError);
  CHECK_THROWS_AS(pvc_from_json(json{{"kind", "app"}, {"name", "   "}}), InventoryError);
  CHECK_THROWS_AS(pvc_from_json(json{{"kind", "app"}}), InventoryError);
}

TEST_CASE("bad kind or field types") {
  CHECK_THROWS_AS(pvc_from_json(json{{"kind", "firmware"}, {"name", "x"}}), InventoryError);
  CHECK_THROWS_AS(pvc_from_json(json{{"kind", "os"}, {"name", "x"}, {"major", -1}}), InventoryError);
  CHECK_THROWS_AS(pvc_from_json(json{{"kind", "os"}, {"name", "x"}, {"vendor", 3}}), InventoryError);
  CHECK_THROWS_AS(load_inventory("/nonexistent/inventory.json"), InventoryError);
}

TEST_CASE("numeric strings are accepted for build parts") {
  auto p = pvc_from_json(json{{"kind", "os"}, {"name", "windows"}, {"major", "10"}, {"build", 19041}});
  CHECK(p.major == 10u);
  CHECK(p.build == 19041u);
}

TEST_CASE("unknown keys are ignored") {
  auto p = pvc_from_json(json{{"kind", "hw"}, {"name", "router"}, {"colour", "blue"}});
  CHECK(p.kind == PvcKind::Hardware);
}

TEST_CASE("json round trip") {
  Pvc p;
  p.kind = PvcKind::OperatingSystem;
  p.name = "Windows XP";
  p.service_pack = "Service Pack 3";
  p.major = 5;
  p.minor = 1;
  p.build = 2600;
  CHECK(pvc_from_json(pvc_to_json(p)) == p);
  Inventory inv{"lab", {p, p}};
  CHECK(inventory_from_json(inventory_to_json(inv)) == inv);
}

TEST_CASE("fingerprint is deterministic and field sensitive") {
  Pvc a;
  a.name = "Adobe Reader";
  a.display_version = "9.0";
  Pvc b = a;
  CHECK(fingerprint_pvc(a) == fingerprint_pvc(b));
  b.display_version = "9.1";
  CHECK(fingerprint_pvc(a) != fingerprint_pvc(b));
  // An absent field differs from an empty one.
  Pvc c = a;
  c.vendor = "";
  CHECK(fingerprint_pvc(a) != fingerprint_pvc(c));
  // Field boundaries cannot be shifted.
  Pvc d = a, e = a;
  d.vendor = "ab";
  d.publisher = "c";
  e.vendor = "a";
  e.publisher = "bc";
  CHECK(fingerprint_pvc(d) != fingerprint_pvc(e));
}

TEST_CASE("fingerprint golden vector") {
  // Computed independently with hashlib over the documented encoding.
  Pvc p;
  p.kind = PvcKind::OperatingSystem;
  p.name = "Windows XP";
  p.service_pack = "Service Pack 3";
  p.major = 5;
  p.minor = 1;
  p.build = 2600;
  CHECK(to_hex(fingerprint_pvc(p)) == "6f72d84238194cfb39e8825ec1ab74e56f69287f2adba3be25fcf582cdb88dd9");
}

}
