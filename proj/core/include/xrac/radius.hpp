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
#include <span>
#include <string>
#include <vector>

#include "xrac/bytes.hpp"
#include "xrac/ipv6.hpp"

/// RADIUS (Access-* only) with EAP-Message transport and the vendor-specific
/// container authorization attributes.
namespace xrac::radius {

enum class Code : std::uint8_t { AccessRequest = 1, AccessAccept = 2, AccessReject = 3, AccessChallenge = 11 };

namespace attr {
inline constexpr std::uint8_t kUserName = 1;
inline constexpr std::uint8_t kState = 24;
inline constexpr std::uint8_t kVendorSpecific = 26;
inline constexpr std::uint8_t kNasIdentifier = 32;
inline constexpr std::uint8_t kEapMessage = 79;
inline constexpr std::uint8_t kMessageAuthenticator = 80;
}  // namespace attr

inline constexpr std::size_t kHeaderSize = 20;
inline constexpr std::size_t kMaxPacketSize = 4096;
inline constexpr std::size_t kMaxAttributeValue = 253;

using Authenticator = std::array<std::uint8_t, 16>;

struct Attribute {
    std::uint8_t type = 0;
    Bytes value;

    bool operator==(const Attribute&) const = default;
};

struct Packet {
    Code code = Code::AccessRequest;
    std::uint8_t identifier = 0;
    /// Request Authenticator for Access-Request (caller-chosen random);
    /// for decoded responses the Response Authenticator seen on the wire.
    Authenticator authenticator{};
    std::vector<Attribute> attributes;

    const Attribute* find(std::uint8_t type) const;
    bool has(std::uint8_t type) const { return find(type) != nullptr; }

    /// Concatenated EAP-Message values in order; empty if there are none.
    Bytes eap_message() const;

    /// Replaces all EAP-Message attributes with `eap` split into <=253 byte
    /// chunks and makes sure a Message-Authenticator placeholder exists.
    void set_eap_message(ByteView eap);

    bool operator==(const Packet&) const = default;
};

bool is_response(Code code);

/// Serializes and signs `packet`.
///
/// Access-Request keeps `packet.authenticator`. Responses need the
/// authenticator of the request they answer and get
/// MD5(code | id | length | request-auth | attributes | secret).
/// A Message-Authenticator attribute, which must be present whenever
/// EAP-Message is, is filled with HMAC-MD5(secret, packet) computed with the
/// field zeroed and the request authenticator in the header.
///
/// Throws EncodeError on attribute overflow, packets over 4096 bytes, a
/// missing Message-Authenticator, or a response without request_auth.
Bytes encode(const Packet& packet, ByteView secret, const std::optional<Authenticator>& request_auth = std::nullopt);

/// Parses and verifies a packet.
///
/// With `expected_request_auth` the Response Authenticator is checked over
/// the raw bytes before anything else. A Message-Authenticator, when
/// present, is always checked (for responses only when the request
/// authenticator is known). EAP-Message fragments must reassemble into one
/// well-formed EAP packet.
///
/// Throws MalformedPacket or AuthenticatorMismatch.
Packet decode(ByteView bytes, ByteView secret, const std::optional<Authenticator>& expected_request_auth = std::nullopt);

/// What a server accepts: an Access-Request that carries a verified
/// Message-Authenticator. A request without one has no integrity protection
/// and fails with AuthenticatorMismatch; any other code is MalformedPacket.
Packet decode_request(ByteView bytes, ByteView secret);

/// Splits an EAP packet into EAP-Message sized chunks.
std::vector<Bytes> split_eap(ByteView eap);

/// Bare attribute list encoding (type | length | value)*. Throws EncodeError.
Bytes encode_attributes(std::span<const Attribute> attributes);
/// Throws MalformedPacket.
std::vector<Attribute> decode_attributes(ByteView bytes);

// --- container authorization data (Vendor-Specific) ------------------------

inline constexpr std::uint32_t kVendorId = 65001;

namespace cazd_attr {
inline constexpr std::uint8_t kRacAddress = 1;
inline constexpr std::uint8_t kAllowedPeer = 2;
inline constexpr std::uint8_t kImageName = 3;
}  // namespace cazd_attr

struct CazdAttributes {
    std::optional<net::Ipv6Address> rac_address;
    std::vector<net::Ipv6Prefix> allowed_peers;
    std::string image_name;

    bool empty() const { return !rac_address && allowed_peers.empty() && image_name.empty(); }
    bool operator==(const CazdAttributes&) const = default;
};

/// Vendor-Specific attributes for `cazd`; peers spill into additional
/// attributes when one would exceed 253 bytes. An empty peer list is legal
/// here (a RAC may run without network grants).
std::vector<Attribute> encode_cazd(const CazdAttributes& cazd);

/// As encode_cazd, but requires at least one allowed peer
/// (std::invalid_argument otherwise).
std::vector<Attribute> build_cazd(const net::Ipv6Address& rac_address, std::span<const net::Ipv6Prefix> allowed_peers,
                                  std::string_view image_name);

/// Collects our vendor's sub-attributes from all Vendor-Specific attributes.
/// Other vendors and attribute types are skipped. Throws MalformedPacket on
/// truncated or invalid sub-attributes.
CazdAttributes parse_cazd(std::span<const Attribute> attributes);

}  // namespace xrac::radius
