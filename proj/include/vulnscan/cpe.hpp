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
#include <compare>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>

namespace vulnscan {

class CpeParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Lowercases, trims, and maps whitespace and ':' to '_'. Idempotent.
std::string normalize_token(std::string_view raw);

/// One CPE attribute value. Default-constructed (or built from an empty or
/// all-whitespace string) it is ANY; otherwise it holds a normalized token.
class CpeComponent {
 public:
  CpeComponent() = default;
  explicit CpeComponent(std::string_view raw);

  static CpeComponent any() { return CpeComponent(); }

  bool is_any() const noexcept { return !value_.has_value(); }
  /// Empty for ANY.
  std::string_view text() const noexcept {
    return value_ ? std::string_view(*value_) : std::string_view();
  }

  /// ANY on either side matches; otherwise exact token equality.
  bool matches(const CpeComponent& other) const noexcept {
    return is_any() || other.is_any() || *value_ == *other.value_;
  }

  auto operator<=>(const CpeComponent&) const = default;

 private:
  std::optional<std::string> value_;
};

enum class CpePart : char {
  Application = 'a',
  Hardware = 'h',
  OperatingSystem = 'o',
};

std::optional<CpePart> cpe_part_from_char(char c) noexcept;
inline char to_char(CpePart part) noexcept { return static_cast<char>(part); }

struct CpeName {
  CpePart part = CpePart::Application;
  CpeComponent vendor;
  CpeComponent product;
  CpeComponent version;
  CpeComponent update;
  CpeComponent edition;
  CpeComponent language;

  /// vendor..language in URI order.
  std::array<const CpeComponent*, 6> components() const noexcept {
    return {&vendor, &product, &version, &update, &edition, &language};
  }

  auto operator<=>(const CpeName&) const = default;
};

using CpeSet = std::set<CpeName>;

/// Parses a CPE 2.2 URI "cpe:/part:vendor:product:version:update:edition:language".
/// Missing trailing components are ANY. Throws CpeParseError naming the bad segment.
CpeName parse_cpe_uri(std::string_view text);

/// Shortest URI form: trailing ANY components are dropped, interior ANY
/// components are emitted empty.
std::string format_cpe_uri(const CpeName& name);

bool cpe_matches(const CpeName& generated, const CpeName& applicability) noexcept;

}  // namespace vulnscan
