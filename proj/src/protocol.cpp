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

#include "vulnscan/protocol.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

namespace vulnscan {

using json = nlohmann::json;

namespace {

constexpr std::size_t kFixedHeader = 1 + 1 + 2;  // version, type, id length

void put_u32(Bytes& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

void put_u16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in) {
  return (std::uint32_t{in[0]} << 24) | (std::uint32_t{in[1]} << 16) | (std::uint32_t{in[2]} << 8) |
         std::uint32_t{in[3]};
}

std::array<std::uint8_t, 2> associated_data(const Envelope& e) { return {e.version, e.msg_type}; }

std::string require_string(const json& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end() || !it->is_string()) {
    throw std::invalid_argument(std::string("message body missing string '") + key + "'");
  }
  return it->get<std::string>();
}

}  // namespace

std::optional<MessageType> message_type_from_byte(std::uint8_t byte) noexcept {
  if (byte >= 1 && byte <= 7) return static_cast<MessageType>(byte);
  return std::nullopt;
}

MessageType message_type_of(const MessageBody& body) noexcept {
  return static_cast<MessageType>(body.index() + 1);
}

json body_to_json(const MessageBody& body) {
  struct Visitor {
    json operator()(const ScanRequestBody& b) const { return {{"rsd", inventory_to_json(b.rsd)}}; }
    json operator()(const ScanAcceptBody& b) const {
      return {{"token", b.token}, {"echo_id_a", b.echo_client_id_a}};
    }
    json operator()(const ScanRejectBody& b) const { return {{"reason", b.reason}}; }
    json operator()(const ResultRequestBody& b) const { return {{"token", b.token}}; }
    json operator()(const ResultNotReadyBody&) const { return json::object(); }
    json operator()(const ResultResponseBody& b) const { return {{"report", b.report}}; }
    json operator()(const ProtocolErrorBody& b) const { return {{"code", b.code}}; }
  };
  return std::visit(Visitor{}, body);
}

MessageBody body_from_json(MessageType type, const json& body) {
  if (!body.is_object()) throw std::invalid_argument("message body must be an object");
  switch (type) {
    case MessageType::ScanRequest: {
      auto it = body.find("rsd");
      if (it == body.end()) throw std::invalid_argument("scan request without rsd");
      return ScanRequestBody{inventory_from_json(*it)};
    }
    case MessageType::ScanAccept:
      return ScanAcceptBody{require_string(body, "token"), require_string(body, "echo_id_a")};
    case MessageType::ScanReject:
      return ScanRejectBody{require_string(body, "reason")};
    case MessageType::ResultRequest:
      return ResultRequestBody{require_string(body, "token")};
    case MessageType::ResultNotReady:
      return ResultNotReadyBody{};
    case MessageType::ResultResponse: {
      auto it = body.find("report");
      if (it == body.end() || !it->is_object()) throw std::invalid_argument("result without report");
      return ResultResponseBody{*it};
    }
    case MessageType::ProtocolError:
      return ProtocolErrorBody{require_string(body, "code")};
  }
  throw std::invalid_argument("unknown message type");
}

Key128 derive_client_key(std::span<const std::uint8_t> secret, std::span<const std::uint8_t> salt,
                         unsigned iterations) {
  if (secret.empty()) throw std::invalid_argument("client secret must not be empty");
  if (salt.size() != kSaltSize) throw std::invalid_argument("salt must be exactly 16 bytes");
  if (iterations == 0) throw std::invalid_argument("iterations must be positive");

  Bytes block(secret.begin(), secret.end());
  block.insert(block.end(), salt.begin(), salt.end());
  Digest mixed{};
  for (unsigned i = 0; i < iterations; ++i) {
    mixed = hmac_sha256(secret, block);
    block.assign(mixed.begin(), mixed.end());
  }
  Key128 key{};
  std::copy_n(mixed.begin(), key.size(), key.begin());
  return key;
}

ClientCredential make_credential(std::string client_id, std::span<const std::uint8_t> secret,
                                 const Salt128& salt) {
  ClientCredential cred;
  cred.client_id = std::move(client_id);
  cred.salt = salt;
  cred.key = derive_client_key(secret, salt);
  return cred;
}

Bytes encode_frame(const Envelope& e) {
  if (e.client_id_a.size() > 0xffff) throw FrameError("client id too long");
  const std::size_t body =
      kFixedHeader + e.client_id_a.size() + kNonceSize + e.ciphertext.size() + kGcmTagSize;
  if (body > kMaxFrameSize) throw FrameError("frame too large");
  Bytes out;
  out.reserve(4 + body);
  put_u32(out, static_cast<std::uint32_t>(body));
  out.push_back(e.version);
  out.push_back(e.msg_type);
  put_u16(out, static_cast<std::uint16_t>(e.client_id_a.size()));
  out.insert(out.end(), e.client_id_a.begin(), e.client_id_a.end());
  out.insert(out.end(), e.nonce.begin(), e.nonce.end());
  out.insert(out.end(), e.ciphertext.begin(), e.ciphertext.end());
  out.insert(out.end(), e.tag.begin(), e.tag.end());
  return out;
}

std::optional<std::size_t> peek_frame_size(std::span<const std::uint8_t> prefix) {
  if (prefix.size() < 4) return std::nullopt;
  std::size_t body = get_u32(prefix);
  if (body > kMaxFrameSize) throw FrameError("announced frame length exceeds limit");
  return 4 + body;
}

Envelope decode_frame(std::span<const std::uint8_t> frame) {
  auto total = peek_frame_size(frame);
  if (!total || *total != frame.size()) throw FrameError("frame length mismatch");
  auto rest = frame.subspan(4);
  if (rest.size() < kFixedHeader + kNonceSize + kGcmTagSize) throw FrameError("frame truncated");

  Envelope e;
  e.version = rest[0];
  e.msg_type = rest[1];
  if (e.version != kProtocolVersion) throw FrameError("unsupported protocol version");
  if (!message_type_from_byte(e.msg_type)) throw FrameError("unknown message type");
  std::size_t id_len = (std::size_t{rest[2]} << 8) | rest[3];
  rest = rest.subspan(kFixedHeader);
  if (rest.size() < id_len + kNonceSize + kGcmTagSize) throw FrameError("frame truncated");
  e.client_id_a.assign(reinterpret_cast<const char*>(rest.data()), id_len);
  rest = rest.subspan(id_len);
  std::copy_n(rest.begin(), kNonceSize, e.nonce.begin());
  rest = rest.subspan(kNonceSize);
  const std::size_t ct_len = rest.size() - kGcmTagSize;
  e.ciphertext.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(ct_len));
  std::copy_n(rest.begin() + static_cast<std::ptrdiff_t>(ct_len), kGcmTagSize, e.tag.begin());
  return e;
}

Envelope seal_message(const ClientCredential& cred, const MessageBody& body, std::uint64_t sn,
                      UnixSeconds ts) {
  return seal_message_as(cred, cred.client_id, cred.client_id, body, sn, ts);
}

Envelope seal_message_as(const ClientCredential& cred, std::string_view header_id,
                         std::string_view payload_id, const MessageBody& body, std::uint64_t sn,
                         UnixSeconds ts) {
  Envelope e;
  e.msg_type = static_cast<std::uint8_t>(message_type_of(body));
  e.client_id_a = header_id;
  e.nonce = random_array<kNonceSize>();
  json payload{{"id_b", payload_id},
               {"sn", sn},
               {"ts", ts.time_since_epoch().count()},
               {"body", body_to_json(body)}};
  auto plaintext = payload.dump();
  auto aad = associated_data(e);
  auto sealed = aes128_gcm_seal(cred.key, e.nonce, aad, as_bytes(plaintext));
  e.ciphertext = std::move(sealed.ciphertext);
  e.tag = sealed.tag;
  return e;
}

std::string_view to_string(OpenErrorCode code) noexcept {
  switch (code) {
    case OpenErrorCode::Malformed: return "malformed";
    case OpenErrorCode::TagInvalid: return "tag-invalid";
    case OpenErrorCode::Impersonation: return "impersonation";
    case OpenErrorCode::StaleTimestamp: return "stale-timestamp";
    case OpenErrorCode::Replay: return "replay";
  }
  return "unknown";
}

OpenedMessage open_message(const Envelope& envelope, ClientCredential& cred, UnixSeconds now,
                           std::chrono::seconds freshness_window) {
  auto aad = associated_data(envelope);
  auto plain = aes128_gcm_open(cred.key, envelope.nonce, aad, envelope.ciphertext, envelope.tag);
  if (!plain) {
    spdlog::warn("protocol: tag verification failed for '{}'", envelope.client_id_a);
    throw OpenError(OpenErrorCode::TagInvalid, "message authentication failed");
  }
  auto type = message_type_from_byte(envelope.msg_type);
  if (!type) throw OpenError(OpenErrorCode::Malformed, "unknown message type");

  json payload;
  std::string id_b;
  std::uint64_t sn = 0;
  std::int64_t ts = 0;
  MessageBody body;
  try {
    payload = json::parse(plain->begin(), plain->end());
    id_b = payload.at("id_b").get<std::string>();
    sn = payload.at("sn").get<std::uint64_t>();
    ts = payload.at("ts").get<std::int64_t>();
    body = body_from_json(*type, payload.at("body"));
  } catch (const std::exception& e) {
    throw OpenError(OpenErrorCode::Malformed, std::string("unusable payload: ") + e.what());
  }

  if (id_b != envelope.client_id_a) {
    spdlog::warn("protocol: impersonation attempt, header id '{}' but sealed id '{}'",
                 envelope.client_id_a, id_b);
    throw OpenError(OpenErrorCode::Impersonation, "client identifier mismatch");
  }
  const auto skew = std::chrono::abs(now - UnixSeconds(std::chrono::seconds(ts)));
  if (skew > freshness_window) {
    spdlog::warn("protocol: stale message from '{}' ({}s skew)", envelope.client_id_a, skew.count());
    throw OpenError(OpenErrorCode::StaleTimestamp, "timestamp outside freshness window");
  }
  if (sn <= cred.last_sn) {
    spdlog::warn("protocol: replayed sequence number {} from '{}'", sn, envelope.client_id_a);
    throw OpenError(OpenErrorCode::Replay, "sequence number not increasing");
  }
  cred.last_sn = sn;
  return OpenedMessage{*type, std::move(body), sn, UnixSeconds(std::chrono::seconds(ts))};
}

bool client_check_echo(std::string_view sent_id, const ScanAcceptBody& accept) noexcept {
  return accept.echo_client_id_a == sent_id;
}

std::uint64_t initial_sequence_number() {
  auto now = std::chrono::system_clock::now().time_since_epoch();
  return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::microseconds>(now).count());
}

UnixSeconds unix_now() {
  return std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now());
}

}  // namespace vulnscan
