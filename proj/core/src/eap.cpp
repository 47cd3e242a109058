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

#include "xrac/eap.hpp"

#include <stdexcept>

#include "xrac/errors.hpp"

namespace xrac::eap {

namespace {

bool carries_type(Code code) { return code == Code::Request || code == Code::Response; }

bool known_code(std::uint8_t c) { return c >= 1 && c <= 4; }

}  // namespace

Bytes encode_packet(const Packet& packet) {
    if (!known_code(static_cast<std::uint8_t>(packet.code))) throw EncodeError("unknown EAP code");
    if (carries_type(packet.code) != packet.type.has_value()) {
        throw EncodeError("EAP type field must be present exactly on Request/Response");
    }
    if (!packet.type && !packet.type_data.empty()) throw EncodeError("EAP Success/Failure carry no data");
    if (packet.type_data.size() > kMaxTypeData) throw EncodeError("EAP type data exceeds 65530 bytes");

    const std::size_t length = kHeaderSize + (packet.type ? 1 + packet.type_data.size() : 0);
    Bytes out;
    out.reserve(length);
    out.push_back(static_cast<std::uint8_t>(packet.code));
    out.push_back(packet.identifier);
    put_u16(out, static_cast<std::uint16_t>(length));
    if (packet.type) {
        out.push_back(*packet.type);
        append(out, packet.type_data);
    }
    return out;
}

Packet decode_packet(ByteView bytes) {
    if (bytes.size() < kHeaderSize) throw MalformedPacket("EAP packet shorter than 4 bytes");
    const std::uint8_t code = bytes[0];
    if (!known_code(code)) throw MalformedPacket("unknown EAP code " + std::to_string(code));
    const std::size_t length = get_u16(bytes, 2);
    if (length != bytes.size()) {
        throw MalformedPacket("EAP length field " + std::to_string(length) + " does not match " +
                              std::to_string(bytes.size()) + " bytes");
    }
    Packet p;
    p.code = static_cast<Code>(code);
    p.identifier = bytes[1];
    if (carries_type(p.code)) {
        if (length < kHeaderSize + 1) throw MalformedPacket("EAP Request/Response without type");
        p.type = bytes[4];
        p.type_data.assign(bytes.begin() + 5, bytes.end());
    } else if (length != kHeaderSize) {
        throw MalformedPacket("EAP Success/Failure with payload");
    }
    return p;
}

Bytes encode_frame(const Frame& frame) {
    const auto t = static_cast<std::uint8_t>(frame.type);
    if (t > static_cast<std::uint8_t>(FrameType::CazdNotify)) throw EncodeError("unknown EAPoUDP frame type");
    if ((frame.type == FrameType::Start || frame.type == FrameType::Logoff) && !frame.body.empty()) {
        throw EncodeError("EAPoUDP Start/Logoff frames carry no body");
    }
    if (frame.body.size() > 0xffff) throw EncodeError("EAPoUDP body exceeds 65535 bytes");
    Bytes out;
    out.reserve(kFrameHeaderSize + frame.body.size());
    out.push_back(kFrameVersion);
    out.push_back(t);
    put_u16(out, static_cast<std::uint16_t>(frame.body.size()));
    append(out, frame.body);
    return out;
}

Frame decode_frame(ByteView bytes) {
    if (bytes.size() < kFrameHeaderSize) throw MalformedFrame("EAPoUDP frame shorter than 4 bytes");
    if (bytes[0] != kFrameVersion) throw MalformedFrame("unsupported EAPoUDP version " + std::to_string(bytes[0]));
    if (bytes[1] > static_cast<std::uint8_t>(FrameType::CazdNotify)) {
        throw MalformedFrame("unknown EAPoUDP frame type " + std::to_string(bytes[1]));
    }
    const std::size_t length = get_u16(bytes, 2);
    if (length != bytes.size() - kFrameHeaderSize) throw MalformedFrame("EAPoUDP body length mismatch");

    Frame f{static_cast<FrameType>(bytes[1]), Bytes(bytes.begin() + kFrameHeaderSize, bytes.end())};
    if ((f.type == FrameType::Start || f.type == FrameType::Logoff) && !f.body.empty()) {
        throw MalformedFrame("EAPoUDP Start/Logoff with body");
    }
    if (f.type == FrameType::EapPacket) {
        try {
            decode_packet(f.body);
        } catch (const MalformedPacket& e) {
            throw MalformedFrame(std::string("EAPoUDP body: ") + e.what());
        }
    }
    return f;
}

crypto::Md5Digest md5_challenge_response(std::uint8_t identifier, ByteView password, ByteView challenge) {
    if (challenge.empty() || challenge.size() > 255) {
        throw std::invalid_argument("MD5 challenge must be 1..255 bytes");
    }
    const std::uint8_t id[1] = {identifier};
    return crypto::md5({ByteView(id), password, challenge});
}

Bytes encode_md5_challenge(ByteView value, ByteView name) {
    if (value.empty() || value.size() > 255) throw EncodeError("MD5-Challenge value must be 1..255 bytes");
    Bytes out;
    out.reserve(1 + value.size() + name.size());
    out.push_back(static_cast<std::uint8_t>(value.size()));
    append(out, value);
    append(out, name);
    return out;
}

Md5ChallengeData decode_md5_challenge(ByteView type_data) {
    if (type_data.empty()) throw MalformedPacket("empty MD5-Challenge data");
    const std::size_t size = type_data[0];
    if (size == 0 || 1 + size > type_data.size()) throw MalformedPacket("MD5-Challenge value-size out of range");
    Md5ChallengeData out;
    out.value.assign(type_data.begin() + 1, type_data.begin() + 1 + static_cast<std::ptrdiff_t>(size));
    out.name.assign(type_data.begin() + 1 + static_cast<std::ptrdiff_t>(size), type_data.end());
    return out;
}

}  // namespace xrac::eap
