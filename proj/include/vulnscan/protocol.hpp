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
#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include <json.hpp>

#include "vulnscan/crypto.hpp"
#include "vulnscan/pvc.hpp"
#include "vulnscan/scan_engine.hpp"

namespace vulnscan {

// Wire frame (big-endian):
//   u32 length of everything after this field
//   u8  version
//   u8  message type
//   u16 id length, then client_id_a (UTF-8)
//   16-byte nonce
//   ciphertext
//   16-byte GCM tag
// The version and type bytes are authenticated as associated data; client_id_a
// is a key-lookup handle, and its integrity is checked against the sealed id_b.

inline constexpr std::uint8_t kProtocolVersion = 2;
inline constexpr std::size_t kNonceSize = 16;
inline constexpr std::size_t kKeySize = 16;
inline constexpr std::size_t kSaltSize = 16;
inline constexpr unsigned kKeyDerivationIterations = 100;
inline constexpr std::size_t kMaxFrameSize = 64u * 1024u * 1024u;
inline constexpr std::chrono::seconds kDefaultFreshnessWindow{60};

using Key128 = std::array<std::uint8_t, kKeySize>;
using Salt128 = std::array<std::uint8_t, kSaltSize>;
using Nonce128 = std::array<std::uint8_t, kNonceSize>;
using Tag128 = std::array<std::uint8_t, kGcmTagSize>;
using UnixSeconds = std::chrono::sys_seconds;

enum class MessageType : std::uint8_t {
  ScanRequest = 1,
  ScanAccept = 2,
  ScanReject = 3,
  ResultRequest = 4,
  ResultNotReady = 5,
  ResultResponse = 6,
  ProtocolError = 7,
};

std::optional<MessageType> message_type_from_byte(std::uint8_t byte) noexcept;

struct ScanRequestBody {
  Inventory rsd;
};
struct ScanAcceptBody {
  std::string token;
  std::string echo_client_id_a;
};
struct ScanRejectBody {
  std::string reason;
};
struct ResultRequestBody {
  std::string token;
};
struct ResultNotReadyBody {};
struct ResultResponseBody {
  nlohmann::json report;  // report_to_json form
};
struct ProtocolErrorBody {
  std::string code;
};

using MessageBody = std::variant<ScanRequestBody, ScanAcceptBody, ScanRejectBody, ResultRequestBody,
                                 ResultNotReadyBody, ResultResponseBody, ProtocolErrorBody>;

MessageType message_type_of(const MessageBody& body) noexcept;
nlohmann::json body_to_json(const MessageBody& body);
/// Throws std::invalid_argument if the JSON does not fit the type.
MessageBody body_from_json(MessageType type, const nlohmann::json& body);

/// Iterated HMAC-SHA-256: block_0 = secret || salt,
/// block_i = HMAC(secret, block_{i-1}), key = first 16 bytes of block_n.
Key128 derive_client_key(std::span<const std::uint8_t> secret, std::span<const std::uint8_t> salt,
                         unsigned iterations = kKeyDerivationIterations);

struct BlockState {
  std::uint32_t violations = 0;
  UnixSeconds blocked_until{};
};

struct ClientCredential {
  std::string client_id;
  Salt128 salt{};
  Key128 key{};
  /// Highest sequence number accepted from the peer.
  std::uint64_t last_sn = 0;
  /// Last sequence number this side sent.
  std::uint64_t sent_sn = 0;
  BlockState block;

  std::uint64_t next_send_sn() noexcept { return ++sent_sn; }
};

/// Sequence-number origin that keeps increasing across process restarts:
/// microseconds since the epoch.
std::uint64_t initial_sequence_number();

ClientCredential make_credential(std::string client_id, std::span<const std::uint8_t> secret,
                                 const Salt128& salt);

struct Envelope {
  std::uint8_t version = kProtocolVersion;
  std::uint8_t msg_type = 0;
  std::string client_id_a;
  Nonce128 nonce{};
  Bytes ciphertext;
  Tag128 tag{};
};

class FrameError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Bytes encode_frame(const Envelope& envelope);
/// Parses one complete frame including its length prefix.
Envelope decode_frame(std::span<const std::uint8_t> frame);
/// Total frame size announced by a 4-byte prefix, or nullopt if fewer than 4
/// bytes are available. Throws FrameError above kMaxFrameSize.
std::optional<std::size_t> peek_frame_size(std::span<const std::uint8_t> prefix);

/// Seals {id_b, sn, ts, body} under the credential's key with a fresh nonce.
Envelope seal_message(const ClientCredential& cred, const MessageBody& body, std::uint64_t sn,
                      UnixSeconds ts);

/// Seals with an explicit id_b. Only useful for building adversarial inputs.
Envelope seal_message_as(const ClientCredential& cred, std::string_view header_id,
                         std::string_view payload_id, const MessageBody& body, std::uint64_t sn,
                         UnixSeconds ts);

enum class OpenErrorCode {
  Malformed,       // tag verified but payload is unusable
  TagInvalid,      // GCM authentication failed
  Impersonation,   // id_b != client_id_a
  StaleTimestamp,  // |now - ts| > window
  Replay,          // sn <= last accepted
};

std::string_view to_string(OpenErrorCode code) noexcept;

class OpenError : public std::runtime_error {
 public:
  OpenError(OpenErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  OpenErrorCode code() const noexcept { return code_; }
  /// True when the sender provably holds the client key.
  bool attributable() const noexcept { return code_ != OpenErrorCode::TagInvalid; }

 private:
  OpenErrorCode code_;
};

struct OpenedMessage {
  MessageType type;
  MessageBody body;
  std::uint64_t sn;
  UnixSeconds ts;
};

/// Checks in order: tag, id_a == id_b, freshness, sequence. On success
/// advances cred.last_sn. Throws OpenError.
OpenedMessage open_message(const Envelope& envelope, ClientCredential& cred, UnixSeconds now,
                           std::chrono::seconds freshness_window = kDefaultFreshnessWindow);

/// Client-side MITM check on an authenticated ScanAccept.
bool client_check_echo(std::string_view sent_id, const ScanAcceptBody& accept) noexcept;

UnixSeconds unix_now();

}  // namespace vulnscan
