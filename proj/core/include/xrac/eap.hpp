// Copyright 2026 The xrac Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
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
#include <string>
#include <string_view>

#include "xrac/bytes.hpp"
#include "xrac/crypto.hpp"
#include "xrac/ipv6.hpp"

/// EAP packets, the EAPoUDP frontend framing, EAP-MD5 and the container
/// identity carried in the Identity response.
namespace xrac::eap {

enum class Code : std::uint8_t { Request = 1, Response = 2, Success = 3, Failure = 4 };

namespace type {
inline constexpr std::uint8_t kIdentity = 1;
inline constexpr std::uint8_t kNotification = 2;
inline constexpr std::uint8_t kNak = 3;
inline constexpr std::uint8_t kMd5Challenge = 4;
}  // namespace type

inline constexpr std::size_t kHeaderSize = 4;
inline constexpr std::size_t kMaxTypeData = 65530;

/// One EAP message. `type` is present exactly for Request and Response.
struct Packet {
    Code code = Code::Request;
    std::uint8_t identifier = 0;
    std::optional<std::uint8_t> type;
    Bytes type_data;

    static Packet request(std::uint8_t id, std::uint8_t type, Bytes data = {}) {
        return {Code::Request, id, type, std::move(data)};
    }
    static Packet response(std::uint8_t id, std::uint8_t type, Bytes data = {}) {
        return {Code::Response, id, type, std::move(data)};
    }
    static Packet success(std::uint8_t id) { return {Code::Success, id, std::nullopt, {}}; }
    static Packet failure(std::uint8_t id) { return {Code::Failure, id, std::nullopt, {}}; }

    bool operator==(const Packet&) const = default;
};

/// code | identifier | length (BE16) | [type | type-data]. Throws EncodeError
/// when the packet violates its invariants or the length would overflow.
Bytes encode_packet(const Packet& packet);

/// Strict inverse of encode_packet: the length field must match the input
/// size exactly. Throws MalformedPacket.
Packet decode_packet(ByteView bytes);

// --- EAPoUDP -------------------------------------------------------------

inline constexpr std::uint8_t kFrameVersion = 1;
inline constexpr std::size_t kFrameHeaderSize = 4;

enum class FrameType : std::uint8_t { EapPacket = 0, Start = 1, Logoff = 2, CazdNotify = 3 };

/// version(=1) | type | body length (BE16) | body.
struct Frame {
    FrameType type = FrameType::EapPacket;
    Bytes body;

    static Frame start() { return {FrameType::Start, {}}; }
    static Frame logoff() { return {FrameType::Logoff, {}}; }
    static Frame carrying(const Packet& packet) { return {FrameType::EapPacket, encode_packet(packet)}; }
    /// Wraps already-encoded EAP bytes without re-encoding them.
    static Frame carrying_encoded(Bytes eap) { return {FrameType::EapPacket, std::move(eap)}; }
    static Frame cazd_notify(Bytes attributes) { return {FrameType::CazdNotify, std::move(attributes)}; }

    bool operator==(const Frame&) const = default;
};

/// Throws EncodeError (oversized body, body on Start/Logoff).
Bytes encode_frame(const Frame& frame);

/// Throws MalformedFrame on bad version, unknown type, length mismatch, a
/// body on Start/Logoff, or an EapPacket body that is not one EAP packet.
Frame decode_frame(ByteView bytes);

// --- EAP-MD5 -------------------------------------------------------------

/// MD5(identifier | password | challenge), the CHAP-style value of an
/// MD5-Challenge response. The challenge must be 1..255 bytes
/// (std::invalid_argument otherwise).
crypto::Md5Digest md5_challenge_response(std::uint8_t identifier, ByteView password, ByteView challenge);

/// Type-data of an MD5-Challenge request or response: value-size | value | name.
struct Md5ChallengeData {
    Bytes value;
    Bytes name;
};

Bytes encode_md5_challenge(ByteView value, ByteView name = {});

/// Throws MalformedPacket.
Md5ChallengeData decode_md5_challenge(ByteView type_data);

// --- container identity ----------------------------------------------------

inline constexpr char kIdentitySeparator = ';';

/// UAND + CAND of one container start, sent as the EAP Identity.
struct ContainerIdentity {
    std::string user_name;
    std::string image_name;
    std::string digest_alg = "sha256";
    crypto::Sha256Digest image_digest{};
    net::Ipv6Address rac_address;

    bool operator==(const ContainerIdentity&) const = default;
};

/// "user=<u>;image=<i>;digest=sha256:<hex>;addr=<ipv6>". Throws EncodeError
/// if a field contains ';' or is empty.
std::string encode_container_identity(const ContainerIdentity& identity);

/// Accepts the four keys in any order, each exactly once. Throws ParseError.
ContainerIdentity parse_container_identity(std::string_view text);

}  // namespace xrac::eap
