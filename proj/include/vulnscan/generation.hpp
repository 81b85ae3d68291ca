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

#include <array>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "vulnscan/cpe.hpp"
#include "vulnscan/pvc.hpp"

namespace vulnscan {

using TokenSet = std::set<std::string>;

/// Lookup tables derived from the CPE dictionary. Rebuilt with every
/// database generation; nothing here is hardcoded except the Linux vendor
/// seed list, which is intersected with the dictionary.
struct GenerationIndex {
  TokenSet known_vendors;
  TokenSet known_products;
  std::map<std::string, TokenSet> vendor_to_products;
  std::map<std::string, TokenSet> product_to_vendors;
  /// Products seen with part 'o', mapped to their vendors.
  std::map<std::string, TokenSet> os_product_to_vendors;
  /// Vendors of any product whose token contains "android".
  TokenSet android_vendors;
  /// Products with part 'o' and vendor "apple".
  TokenSet apple_os_products;
  /// Seed list intersected with dictionary vendors.
  TokenSet linux_vendors;

  bool operator==(const GenerationIndex&) const = default;
};

/// Linux distribution vendors recognised when present in the dictionary.
extern const std::array<std::string_view, 22> kLinuxVendorSeed;

GenerationIndex build_generation_index(std::span<const CpeName> dictionary);

/// Separators tried when joining name words: none, underscore, dash.
inline constexpr std::array<std::string_view, 3> kWordSeparators = {"", "_", "-"};

enum class WordClass { VersionLike, Plain };

/// VersionLike iff the word is digits with optional dot-separated digit groups.
WordClass classify_version_token(std::string_view word);

/// Lowercased whitespace-separated words.
std::vector<std::string> split_words(std::string_view name);

/// All words joined with each separator in turn. A single word yields itself.
TokenSet word_combinations(std::string_view name);

/// First letters of the non-version words; empty unless at least two remain.
TokenSet abbreviate_name(std::string_view name);

/// Every substring of the form digits(.digits)+.
TokenSet extract_versions_from_text(std::string_view title);

TokenSet os_vendor_candidates(const Pvc& pvc, const GenerationIndex& index);
TokenSet os_product_candidates(const Pvc& pvc);
TokenSet os_version_candidates(const Pvc& pvc);
TokenSet os_update_candidates(const Pvc& pvc);

TokenSet app_vendor_candidates(const Pvc& pvc);
TokenSet app_product_candidates(const Pvc& pvc, const GenerationIndex& index);
TokenSet app_version_candidates(const Pvc& pvc);

class GenerationContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ComponentCandidates {
  std::set<CpePart> platforms;
  TokenSet vendors;
  TokenSet products;
  TokenSet versions;
  TokenSet updates;
  TokenSet editions;
  TokenSet languages;
};

/// Cross product of the candidate sets. An empty optional set contributes a
/// single ANY, so the output size is
/// |P|*|V|*|PR|*|VR|*max(1,|U|)*max(1,|E|)*max(1,|L|).
/// Throws GenerationContractError when a required set is empty or holds an
/// empty token.
std::vector<CpeName> cartesian_expand(const ComponentCandidates& candidates);

ComponentCandidates component_candidates(const Pvc& pvc, const GenerationIndex& index);

/// Candidate CPE names for one PVC. Never empty.
CpeSet generate_cpes(const Pvc& pvc, const GenerationIndex& index);

}  // namespace vulnscan
