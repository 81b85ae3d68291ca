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

#include "vulnscan/generation.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

namespace vulnscan {

const std::array<std::string_view, 22> kLinuxVendorSeed = {
    "canonical", "conectiva", "corel",   "debian",   "engardelinux",     "gentoo",
    "ibm",       "linux",     "linuxmint", "mandrakesoft", "mandriva",   "novell",
    "opensuse",  "opensuse_project", "oracle", "redhat", "scientificlinux", "sgi",
    "slackware", "suse",      "trustix", "windriver"};

namespace {

bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

std::string join(std::span<const std::string> words, std::string_view separator) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i > 0) out.append(separator);
    out.append(words[i]);
  }
  return out;
}

TokenSet joins(std::span<const std::string> words) {
  if (words.size() == 1) return {words.front()};
  TokenSet out;
  for (auto sep : kWordSeparators) out.insert(join(words, sep));
  return out;
}

std::vector<std::string> plain_words(std::string_view name) {
  auto words = split_words(name);
  std::erase_if(words, [](const std::string& w) {
    return classify_version_token(w) == WordClass::VersionLike;
  });
  return words;
}

void insert_normalized(TokenSet& out, const std::optional<std::string>& value) {
  if (!value) return;
  auto token = normalize_token(*value);
  if (!token.empty()) out.insert(std::move(token));
}

TokenSet vendor_hints(const Pvc& pvc) {
  TokenSet hints;
  insert_normalized(hints, pvc.vendor);
  insert_normalized(hints, pvc.publisher);
  return hints;
}

TokenSet intersect(const TokenSet& a, const TokenSet& b) {
  TokenSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
  return out;
}

}  // namespace

GenerationIndex build_generation_index(std::span<const CpeName> dictionary) {
  GenerationIndex index;
  for (const auto& name : dictionary) {
    if (name.vendor.is_any()) continue;
    std::string vendor(name.vendor.text());
    index.known_vendors.insert(vendor);
    if (name.product.is_any()) continue;
    std::string product(name.product.text());
    index.known_products.insert(product);
    index.vendor_to_products[vendor].insert(product);
    index.product_to_vendors[product].insert(vendor);
    if (product.find("android") != std::string::npos) index.android_vendors.insert(vendor);
    if (name.part == CpePart::OperatingSystem) {
      index.os_product_to_vendors[product].insert(vendor);
      if (vendor == "apple") index.apple_os_products.insert(product);
    }
  }
  for (auto vendor : kLinuxVendorSeed) {
    if (index.known_vendors.contains(std::string(vendor))) {
      index.linux_vendors.insert(std::string(vendor));
    }
  }
  return index;
}

WordClass classify_version_token(std::string_view word) {
  // digits ( '.' digits )*
  bool expect_digit = true;
  bool saw_digit = false;
  for (char c : word) {
    if (is_digit(c)) {
      expect_digit = false;
      saw_digit = true;
    } else if (c == '.' && !expect_digit) {
      expect_digit = true;
    } else {
      return WordClass::Plain;
    }
  }
  return (saw_digit && !expect_digit) ? WordClass::VersionLike : WordClass::Plain;
}

std::vector<std::string> split_words(std::string_view name) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < name.size()) {
    while (i < name.size() && std::isspace(static_cast<unsigned char>(name[i]))) ++i;
    std::size_t start = i;
    while (i < name.size() && !std::isspace(static_cast<unsigned char>(name[i]))) ++i;
    if (i > start) words.push_back(normalize_token(name.substr(start, i - start)));
  }
  return words;
}

TokenSet word_combinations(std::string_view name) {
  auto words = split_words(name);
  if (words.empty()) return {};
  return joins(words);
}

TokenSet abbreviate_name(std::string_view name) {
  auto words = plain_words(name);
  if (words.size() <= 1) return {};
  std::string abbreviation;
  for (const auto& w : words) abbreviation.push_back(w.front());
  return {abbreviation};
}

TokenSet extract_versions_from_text(std::string_view title) {
  static const std::regex kVersion(R"(\d+(\.\d+)+)");
  TokenSet out;
  std::string text(title);
  for (std::sregex_iterator it(text.begin(), text.end(), kVersion), end; it != end; ++it) {
    out.insert(it->str());
  }
  return out;
}

TokenSet os_vendor_candidates(const Pvc& pvc, const GenerationIndex& index) {
  const std::string name = normalize_token(pvc.name);
  const TokenSet hints = vendor_hints(pvc);
  const TokenSet combos = word_combinations(pvc.name);

  // 1. Windows is always Microsoft.
  if (name.find("windows") != std::string::npos) return {"microsoft"};

  // 2. Android: narrow the dictionary's android vendors by hint, else all of them.
  if (name.find("android") != std::string::npos) {
    auto hinted = intersect(hints, index.android_vendors);
    if (!hinted.empty()) return hinted;
    if (!index.android_vendors.empty()) return index.android_vendors;
  }

  // 3. Apple OS products.
  for (const auto& combo : combos) {
    if (index.apple_os_products.contains(combo)) return {"apple"};
  }

  // 4. Linux: vendor hint first, then the vendor owning a matching OS product.
  {
    auto hinted = intersect(hints, index.linux_vendors);
    if (!hinted.empty()) return hinted;
    TokenSet owners;
    for (const auto& combo : combos) {
      auto it = index.os_product_to_vendors.find(combo);
      if (it == index.os_product_to_vendors.end()) continue;
      for (const auto& vendor : it->second) {
        if (index.linux_vendors.contains(vendor)) owners.insert(vendor);
      }
    }
    if (!owners.empty()) return owners;
  }

  // 5. Any PVC property that is itself a known vendor.
  {
    TokenSet probes = hints;
    for (auto& w : split_words(pvc.name)) probes.insert(std::move(w));
    probes.insert(combos.begin(), combos.end());
    auto known = intersect(probes, index.known_vendors);
    if (!known.empty()) return known;
  }

  // 6. Owners of any OS product matching the name.
  TokenSet owners;
  for (const auto& combo : combos) {
    auto it = index.os_product_to_vendors.find(combo);
    if (it != index.os_product_to_vendors.end()) owners.insert(it->second.begin(), it->second.end());
  }
  return owners;
}

TokenSet os_product_candidates(const Pvc& pvc) { return word_combinations(pvc.name); }

TokenSet os_version_candidates(const Pvc& pvc) {
  TokenSet out;
  const auto s = [](std::uint64_t v) { return std::to_string(v); };
  if (pvc.major && pvc.minor && pvc.build) {
    out.insert(s(*pvc.major) + "." + s(*pvc.minor) + "." + s(*pvc.build));
  }
  if (pvc.revision) out.insert(s(*pvc.revision));
  if (pvc.major && pvc.minor && pvc.build && pvc.revision) {
    out.insert(s(*pvc.major) + "." + s(*pvc.minor) + "." + s(*pvc.build) + "." + s(*pvc.revision));
  }
  if (pvc.major && pvc.minor) out.insert(s(*pvc.major) + "." + s(*pvc.minor));
  if (pvc.build) out.insert(s(*pvc.build));
  out.insert("-");
  auto combos = word_combinations(pvc.name);
  out.insert(combos.begin(), combos.end());
  insert_normalized(out, pvc.version);
  return out;
}

TokenSet os_update_candidates(const Pvc& pvc) {
  static const std::regex kServicePack(R"(service\s*pack\s*(\d+))", std::regex::icase);
  if (!pvc.service_pack) return {};
  std::smatch m;
  if (std::regex_search(*pvc.service_pack, m, kServicePack)) return {"sp" + m[1].str()};
  return {};
}

TokenSet app_vendor_candidates(const Pvc& pvc) {
  TokenSet out;
  insert_normalized(out, pvc.publisher);
  insert_normalized(out, pvc.vendor);
  auto words = split_words(pvc.name);
  if (words.size() >= 2) out.insert(words[0]);
  if (words.size() >= 3) {
    auto pair = joins(std::span<const std::string>(words.data(), 2));
    out.insert(pair.begin(), pair.end());
  }
  if (out.empty()) insert_normalized(out, pvc.name);
  return out;
}

TokenSet app_product_candidates(const Pvc& pvc, const GenerationIndex& index) {
  const auto words = plain_words(pvc.name);

  // Phase 1: keep only candidates the dictionary already knows.
  TokenSet phase1;
  if (!words.empty()) phase1 = joins(words);
  // The first word may be the vendor ("Adobe Reader"); try the remainder too.
  if (words.size() >= 2) {
    auto rest = joins(std::vector<std::string>(words.begin() + 1, words.end()));
    phase1.insert(rest.begin(), rest.end());
  }
  auto abbreviations = abbreviate_name(pvc.name);
  phase1.insert(abbreviations.begin(), abbreviations.end());
  auto known = intersect(phase1, index.known_products);
  if (!known.empty()) return known;

  // Phase 2: structural guesses by non-version word count.
  TokenSet out;
  const auto add = [&out](std::initializer_list<std::string> parts) {
    std::vector<std::string> v(parts);
    auto j = joins(v);
    out.insert(j.begin(), j.end());
  };
  switch (words.size()) {
    case 0:
      insert_normalized(out, pvc.name);
      break;
    case 1:
      out.insert(words[0]);
      break;
    case 2:
      out.insert(words[0]);
      add({words[0], words[1]});
      break;
    case 3:
      out.insert(words[1]);
      add({words[0], words[2]});
      add({words[1], words[2]});
      add({words[0], words[1], words[2]});
      break;
    default: {
      auto all = joins(words);
      out.insert(all.begin(), all.end());
      break;
    }
  }
  return out;
}

TokenSet app_version_candidates(const Pvc& pvc) {
  TokenSet out;
  insert_normalized(out, pvc.display_version);
  auto in_title = extract_versions_from_text(pvc.name);
  out.insert(in_title.begin(), in_title.end());
  insert_normalized(out, pvc.version);
  if (out.empty()) out.insert("-");
  return out;
}

std::vector<CpeName> cartesian_expand(const ComponentCandidates& c) {
  const auto require = [](const TokenSet& set, const char* what) {
    if (set.empty()) throw GenerationContractError(std::string("empty candidate set: ") + what);
  };
  const auto no_empty_members = [](const TokenSet& set, const char* what) {
    if (set.contains(std::string())) {
      throw GenerationContractError(std::string("empty token in candidate set: ") + what);
    }
  };
  if (c.platforms.empty()) throw GenerationContractError("empty candidate set: platforms");
  require(c.vendors, "vendors");
  require(c.products, "products");
  require(c.versions, "versions");
  no_empty_members(c.vendors, "vendors");
  no_empty_members(c.products, "products");
  no_empty_members(c.versions, "versions");
  no_empty_members(c.updates, "updates");
  no_empty_members(c.editions, "editions");
  no_empty_members(c.languages, "languages");

  const auto or_any = [](const TokenSet& set) {
    std::vector<CpeComponent> out;
    if (set.empty()) {
      out.emplace_back();
    } else {
      for (const auto& token : set) out.emplace_back(token);
    }
    return out;
  };
  const auto updates = or_any(c.updates);
  const auto editions = or_any(c.editions);
  const auto languages = or_any(c.languages);

  std::vector<CpeName> out;
  out.reserve(c.platforms.size() * c.vendors.size() * c.products.size() * c.versions.size() *
              updates.size() * editions.size() * languages.size());
  for (auto p : c.platforms) {
    for (const auto& v : c.vendors) {
      for (const auto& pr : c.products) {
        for (const auto& vr : c.versions) {
          for (const auto& u : updates) {
            for (const auto& e : editions) {
              for (const auto& l : languages) {
                out.push_back(CpeName{p, CpeComponent(v), CpeComponent(pr), CpeComponent(vr), u, e, l});
              }
            }
          }
        }
      }
    }
  }
  return out;
}

ComponentCandidates component_candidates(const Pvc& pvc, const GenerationIndex& index) {
  ComponentCandidates c;
  if (pvc.kind == PvcKind::OperatingSystem) {
    c.platforms = {CpePart::OperatingSystem};
    c.vendors = os_vendor_candidates(pvc, index);
    if (c.vendors.empty()) c.vendors = index.known_vendors;
    if (c.vendors.empty()) insert_normalized(c.vendors, pvc.name);
    c.products = os_product_candidates(pvc);
    c.versions = os_version_candidates(pvc);
    c.updates = os_update_candidates(pvc);
  } else {
    c.platforms = {pvc.kind == PvcKind::Hardware ? CpePart::Hardware : CpePart::Application};
    c.vendors = app_vendor_candidates(pvc);
    c.products = app_product_candidates(pvc, index);
    c.versions = app_version_candidates(pvc);
  }
  if (c.products.empty()) insert_normalized(c.products, pvc.name);
  return c;
}

CpeSet generate_cpes(const Pvc& pvc, const GenerationIndex& index) {
  auto names = cartesian_expand(component_candidates(pvc, index));
  return CpeSet(std::make_move_iterator(names.begin()), std::make_move_iterator(names.end()));
}

}  // namespace vulnscan
