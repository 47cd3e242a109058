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

#include "xrac/radius.hpp"

#include <algorithm>
#include <stdexcept>

#include "xrac/crypto.hpp"
#include "xrac/eap.hpp"
#include "xrac/errors.hpp"

namespace xrac::radius {

namespace {

constexpr std::size_t kAuthOffset = 4;
constexpr std::size_t kMessageAuthenticatorSize = 16;

bool known_code(std::uint8_t c) { return c == 1 || c == 2 || c == 3 || c == 11; }

// Offset of the Message-Authenticator value inside `wire`, if any.
std::optional<std::size_t> message_authenticator_offset(ByteView wire) {
    std::size_t off = kHeaderSize;
    while (off + 2 <= wire.size()) {
        if (wire[off] == attr::kMessageAuthenticator) return off + 2;
        if (wire[off + 1] < 2) return std::nullopt;
        off += wire[off + 1];
    }
    return std::nullopt;
}

}  // namespace

const Attribute* Packet::find(std::uint8_t type) const {
    auto it = std::find_if(attributes.begin(), attributes.end(), [&](const Attribute& a) { return a.type == type; });
    return it == attributes.end() ? nullptr : &*it;
}

Bytes Packet::eap_message() const {
    Bytes out;
    for (const auto& a : attributes) {
        if (a.type == attr::kEapMessage) append(out, a.value);
    }
    return out;
}

void Packet::set_eap_message(ByteView eap) {
    std::erase_if(attributes, [](const Attribute& a) { return a.type == attr::kEapMessage; });
    for (auto& chunk : split_eap(eap)) attributes.push_back({attr::kEapMessage, std::move(chunk)});
    if (!has(attr::kMessageAuthenticator)) {
        attributes.push_back({attr::kMessageAuthenticator, Bytes(kMessageAuthenticatorSize, 0)});
    }
}

bool is_response(Code code) { return code != Code::AccessRequest; }

std::vector<Bytes> split_eap(ByteView eap) {
    std::vector<Bytes> chunks;
    for (std::size_t off = 0; off < eap.size(); off += kMaxAttributeValue) {
        const auto n = std::min(kMaxAttributeValue, eap.size() - off);
        chunks.emplace_back(eap.begin() + static_cast<std::ptrdiff_t>(off),
                            eap.begin() + static_cast<std::ptrdiff_t>(off + n));
    }
    return chunks;
}

Bytes encode_attributes(std::span<const Attribute> attributes) {
    Bytes out;
    for (const auto& a : attributes) {
        if (a.value.size() > kMaxAttributeValue) {
            throw EncodeError("RADIUS attribute " + std::to_string(a.type) + " value exceeds 253 bytes");
        }
        out.push_back(a.type);
        out.push_back(static_cast<std::uint8_t>(2 + a.value.size()));
        append(out, a.value);
    }
    return out;
}

std::vector<Attribute> decode_attributes(ByteView bytes) {
    std::vector<Attribute> out;
    std::size_t off = 0;
    while (off < bytes.size()) {
        if (off + 2 > bytes.size()) throw MalformedPacket("truncated RADIUS attribute header");
        const std::size_t len = bytes[off + 1];
        if (len < 2 || off + len > bytes.size()) throw MalformedPacket("RADIUS attribute length out of range");
        out.push_back({bytes[off], Bytes(bytes.begin() + static_cast<std::ptrdiff_t>(off + 2),
                                         bytes.begin() + static_cast<std::ptrdiff_t>(off + len))});
        off += len;
    }
    return out;
}

Bytes encode(const Packet& packet, ByteView secret, const std::optional<Authenticator>& request_auth) {
    const auto code = static_cast<std::uint8_t>(packet.code);
    if (!known_code(code)) throw EncodeError("unsupported RADIUS code " + std::to_string(code));
    const bool response = is_response(packet.code);
    if (response && !request_auth) throw EncodeError("RADIUS response needs the request authenticator");

    const auto ma_count = std::count_if(packet.attributes.begin(), packet.attributes.end(),
                                        [](const Attribute& a) { return a.type == attr::kMessageAuthenticator; });
    if (ma_count > 1) throw EncodeError("more than one Message-Authenticator");
    if (packet.has(attr::kEapMessage) && ma_count == 0) {
        throw EncodeError("EAP-Message requires Message-Authenticator");
    }

    std::vector<Attribute> attrs = packet.attributes;
    for (auto& a : attrs) {
        if (a.type == attr::kMessageAuthenticator) a.value.assign(kMessageAuthenticatorSize, 0);
    }
    const Bytes body = encode_attributes(attrs);
    const std::size_t length = kHeaderSize + body.size();
    if (length > kMaxPacketSize) throw EncodeError("RADIUS packet exceeds 4096 bytes");

    const Authenticator& header_auth = response ? *request_auth : packet.authenticator;
    Bytes out;
    out.reserve(length);
    out.push_back(code);
    out.push_back(packet.identifier);
    put_u16(out, static_cast<std::uint16_t>(length));
    append(out, header_auth);
    append(out, body);

    if (ma_count == 1) {
        const auto off = *message_authenticator_offset(out);
        const auto mac = crypto::hmac_md5(secret, out);
        std::copy(mac.begin(), mac.end(), out.begin() + static_cast<std::ptrdiff_t>(off));
    }
    if (response) {
        const auto auth = crypto::md5({ByteView(out), secret});
        std::copy(auth.begin(), auth.end(), out.begin() + kAuthOffset);
    }
    return out;
}

Packet decode(ByteView bytes, ByteView secret, const std::optional<Authenticator>& expected_request_auth) {
    if (bytes.size() < kHeaderSize) throw MalformedPacket("RADIUS packet shorter than 20 bytes");
    if (bytes.size() > kMaxPacketSize) throw MalformedPacket("RADIUS packet exceeds 4096 bytes");

    if (expected_request_auth) {
        const auto expected = crypto::md5({bytes.subspan(0, kAuthOffset), ByteView(*expected_request_auth),
                                           bytes.subspan(kHeaderSize), secret});
        if (!crypto::constant_time_equal(expected, bytes.subspan(kAuthOffset, 16))) {
            throw AuthenticatorMismatch("RADIUS Response Authenticator mismatch");
        }
    }

    if (!known_code(bytes[0])) throw MalformedPacket("unsupported RADIUS code " + std::to_string(bytes[0]));
    if (get_u16(bytes, 2) != bytes.size()) throw MalformedPacket("RADIUS length field does not match datagram size");

    Packet p;
    p.code = static_cast<Code>(bytes[0]);
    p.identifier = bytes[1];
    std::copy_n(bytes.begin() + kAuthOffset, 16, p.authenticator.begin());
    p.attributes = decode_attributes(bytes.subspan(kHeaderSize));

    if (expected_request_auth && !is_response(p.code)) {
        throw MalformedPacket("expected a RADIUS response");
    }

    const Attribute* ma = nullptr;
    for (const auto& a : p.attributes) {
        if (a.type != attr::kMessageAuthenticator) continue;
        if (ma) throw MalformedPacket("more than one Message-Authenticator");
        ma = &a;
    }
    if (ma) {
        if (ma->value.size() != kMessageAuthenticatorSize) throw MalformedPacket("Message-Authenticator must be 16 bytes");
        const bool verifiable = !is_response(p.code) || expected_request_auth;
        if (verifiable) {
            Bytes copy(bytes.begin(), bytes.end());
            if (is_response(p.code)) {
                std::copy(expected_request_auth->begin(), expected_request_auth->end(), copy.begin() + kAuthOffset);
            }
            const auto off = *message_authenticator_offset(copy);
            std::fill_n(copy.begin() + static_cast<std::ptrdiff_t>(off), kMessageAuthenticatorSize, 0);
            const auto mac = crypto::hmac_md5(secret, copy);
            if (!crypto::constant_time_equal(mac, ma->value)) {
                throw AuthenticatorMismatch("Message-Authenticator mismatch");
            }
        }
    }

    if (p.has(attr::kEapMessage)) {
        if (!ma) throw MalformedPacket("EAP-Message without Message-Authenticator");
        eap::decode_packet(p.eap_message());
    }
    return p;
}

Packet decode_request(ByteView bytes, ByteView secret) {
    if (!bytes.empty() && bytes[0] != static_cast<std::uint8_t>(Code::AccessRequest))
        throw MalformedPacket("expected an Access-Request");
    auto p = decode(bytes, secret);
    if (!p.has(attr::kMessageAuthenticator))
        throw AuthenticatorMismatch("Access-Request without Message-Authenticator");
    return p;
}

// --- CAZD ------------------------------------------------------------------

namespace {

constexpr std::size_t kVendorHeader = 4;
constexpr std::size_t kPeerData = 17;

Bytes sub_attribute(std::uint8_t type, ByteView data) {
    Bytes out{type, static_cast<std::uint8_t>(2 + data.size())};
    append(out, data);
    return out;
}

Bytes vendor_prefix() {
    Bytes out;
    put_u32(out, kVendorId);
    return out;
}

}  // namespace

std::vector<Attribute> encode_cazd(const CazdAttributes& cazd) {
    if (cazd.image_name.size() > kMaxAttributeValue - kVendorHeader - 18 - 2) {
        throw EncodeError("CAZD image name too long");
    }
    std::vector<Attribute> out;
    Bytes current = vendor_prefix();
    if (cazd.rac_address) append(current, sub_attribute(cazd_attr::kRacAddress, cazd.rac_address->octets()));
    if (!cazd.image_name.empty()) append(current, sub_attribute(cazd_attr::kImageName, to_bytes(cazd.image_name)));

    for (const auto& peer : cazd.allowed_peers) {
        if (current.size() + 2 + kPeerData > kMaxAttributeValue) {
            out.push_back({attr::kVendorSpecific, std::move(current)});
            current = vendor_prefix();
        }
        Bytes data{peer.length()};
        append(data, peer.network().octets());
        append(current, sub_attribute(cazd_attr::kAllowedPeer, data));
    }
    if (current.size() > kVendorHeader || out.empty()) out.push_back({attr::kVendorSpecific, std::move(current)});
    return out;
}

std::vector<Attribute> build_cazd(const net::Ipv6Address& rac_address, std::span<const net::Ipv6Prefix> allowed_peers,
                                  std::string_view image_name) {
    if (allowed_peers.empty()) throw std::invalid_argument("build_cazd needs at least one allowed peer");
    return encode_cazd({rac_address, {allowed_peers.begin(), allowed_peers.end()}, std::string(image_name)});
}

CazdAttributes parse_cazd(std::span<const Attribute> attributes) {
    CazdAttributes out;
    for (const auto& a : attributes) {
        if (a.type != attr::kVendorSpecific) continue;
        if (a.value.size() < kVendorHeader) throw MalformedPacket("Vendor-Specific attribute without vendor id");
        if (get_u32(a.value, 0) != kVendorId) continue;

        const ByteView subs = ByteView(a.value).subspan(kVendorHeader);
        std::size_t off = 0;
        while (off < subs.size()) {
            if (off + 2 > subs.size()) throw MalformedPacket("truncated CAZD sub-attribute");
            const std::uint8_t type = subs[off];
            const std::size_t len = subs[off + 1];
            if (len < 2 || off + len > subs.size()) throw MalformedPacket("CAZD sub-attribute length out of range");
            const ByteView data = subs.subspan(off + 2, len - 2);
            switch (type) {
                case cazd_attr::kRacAddress: {
                    if (data.size() != 16) throw MalformedPacket("CAZD RacAddress must be 16 bytes");
                    if (out.rac_address) throw MalformedPacket("duplicate CAZD RacAddress");
                    net::Ipv6Address::Octets octets{};
                    std::copy(data.begin(), data.end(), octets.begin());
                    out.rac_address = net::Ipv6Address(octets);
                    break;
                }
                case cazd_attr::kAllowedPeer: {
                    if (data.size() != kPeerData || data[0] > 128) throw MalformedPacket("invalid CAZD AllowedPeer");
                    net::Ipv6Address::Octets octets{};
                    std::copy(data.begin() + 1, data.end(), octets.begin());
                    out.allowed_peers.emplace_back(net::Ipv6Address(octets), data[0]);
                    break;
                }
                case cazd_attr::kImageName:
                    out.image_name = to_string(data);
                    break;
                default:
                    break;
            }
            off += len;
        }
    }
    return out;
}

}  // namespace xrac::radius
