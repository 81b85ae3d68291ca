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
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vulnscan {

using Bytes = std::vector<std::uint8_t>;
using Digest = std::array<std::uint8_t, 32>;

class CryptoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::span<const std::uint8_t> as_bytes(std::string_view text) noexcept;

std::string to_hex(std::span<const std::uint8_t> data);
// Accepts upper or lower case; throws std::invalid_argument on odd length or
// non-hex characters.
Bytes from_hex(std::string_view hex);

Digest sha256(std::span<const std::uint8_t> data);
Digest hmac_sha256(std::span<const std::uint8_t> key,
                   std::span<const std::uint8_t> data);

// Fills the buffer from the OS CSPRNG.
void random_fill(std::span<std::uint8_t> out);

template <std::size_t N>
std::array<std::uint8_t, N> random_array() {
  std::array<std::uint8_t, N> out{};
  random_fill(out);
  return out;
}

inline constexpr std::size_t kGcmTagSize = 16;

struct GcmSealed {
  Bytes ciphertext;
  std::array<std::uint8_t, kGcmTagSize> tag{};
};

// AES-128-GCM with caller-chosen IV length (GHASH-derived counter for IVs
// other than 96 bits).
GcmSealed aes128_gcm_seal(std::span<const std::uint8_t, 16> key,
                          std::span<const std::uint8_t> iv,
                          std::span<const std::uint8_t> aad,
                          std::span<const std::uint8_t> plaintext);

// Returns nullopt when the tag does not verify.
std::optional<Bytes> aes128_gcm_open(std::span<const std::uint8_t, 16> key,
                                     std::span<const std::uint8_t> iv,
                                     std::span<const std::uint8_t> aad,
                                     std::span<const std::uint8_t> ciphertext,
                                     std::span<const std::uint8_t, kGcmTagSize> tag);

}  // namespace vulnscan
