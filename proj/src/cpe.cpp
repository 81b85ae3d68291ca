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

#include "vulnscan/cpe.hpp"

#include <algorithm>
#include <cctype>
#include <vector>

namespace vulnscan {

namespace {

constexpr std::string_view kPrefix = "cpe:/";
constexpr std::size_t kMaxSegments = 7;

bool is_space(unsigned char c) { return std::isspace(c) != 0; }

}  // namespace

std::string normalize_token(std::string_view raw) {
  auto first = std::find_if_not(raw.begin(), raw.end(),
                                [](char c) { return is_space(static_cast<unsigned char>(c)); });
  auto last = std::find_if_not(raw.rbegin(), raw.rend(),
                               [](char c) { return is_space(static_cast<unsigned char>(c)); })
                  .base();
  std::string out;
  if (first >= last) return out;
  out.reserve(static_cast<std::size_t>(last - first));
  for (auto it = first; it != last; ++it) {
    auto c = static_cast<unsigned char>(*it);
    if (is_space(c) || c == ':') {
      out.push_back('_');
    } else {
      out.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  return out;
}

CpeComponent::CpeComponent(std::string_view raw) {
  auto token = normalize_token(raw);
  if (!token.empty()) value_ = std::move(token);
}

std::optional<CpePart> cpe_part_from_char(char c) noexcept {
  switch (std::tolower(static_cast<unsigned char>(c))) {
    case 'a': return CpePart::Application;
    case 'h': return CpePart::Hardware;
    case 'o': return CpePart::OperatingSystem;
    default: return std::nullopt;
  }
}

CpeName parse_cpe_uri(std::string_view text) {
  if (text.size() < kPrefix.size() ||
      !std::equal(kPrefix.begin(), kPrefix.end(), text.begin(),
                  [](char a, char b) { return a == std::tolower(static_cast<unsigned char>(b)); })) {
    throw CpeParseError("malformed CPE prefix in '" + std::string(text) +
                        "' (expected 'cpe:/')");
  }
  std::vector<std::string_view> segments;
  std::string_view rest = text.substr(kPrefix.size());
  while (true) {
    auto colon = rest.find(':');
    segments.push_back(rest.substr(0, colon));
    if (colon == std::string_view::npos) break;
    rest.remove_prefix(colon + 1);
  }
  if (segments.size() > kMaxSegments) {
    throw CpeParseError("too many CPE components in '" + std::string(text) +
                        "': unexpected segment '" + std::string(segments[kMaxSegments]) + "'");
  }

  auto part_token = normalize_token(segments[0]);
  std::optional<CpePart> part;
  if (part_token.size() == 1) part = cpe_part_from_char(part_token[0]);
  if (!part) {
    throw CpeParseError("invalid CPE part '" + std::string(segments[0]) + "' in '" +
                        std::string(text) + "'");
  }

  CpeName name;
  name.part = *part;
  CpeComponent* slots[] = {&name.vendor,  &name.product, &name.version,
                           &name.update,  &name.edition, &name.language};
  for (std::size_t i = 1; i < segments.size(); ++i) {
    *slots[i - 1] = CpeComponent(segments[i]);
  }
  return name;
}

std::string format_cpe_uri(const CpeName& name) {
  auto components = name.components();
  std::size_t used = components.size();
  while (used > 0 && components[used - 1]->is_any()) --used;

  std::string out(kPrefix);
  out.push_back(to_char(name.part));
  for (std::size_t i = 0; i < used; ++i) {
    out.push_back(':');
    out.append(components[i]->text());
  }
  return out;
}

bool cpe_matches(const CpeName& generated, const CpeName& applicability) noexcept {
  if (generated.part != applicability.part) return false;
  auto lhs = generated.components();
  auto rhs = applicability.components();
  for (std::size_t i = 0; i < lhs.size(); ++i) {
    if (!lhs[i]->matches(*rhs[i])) return false;
  }
  return true;
}

}  // namespace vulnscan
