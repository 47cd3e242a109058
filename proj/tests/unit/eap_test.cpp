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

#include <gtest/gtest.h>

#include "oracle/frozen_vectors.hpp"
#include "oracle/reference_hashes.hpp"
#include "support/generators.hpp"
#include "xrac/eap.hpp"
#include "xrac/errors.hpp"

namespace xrac::eap {
namespace {

using oracle::frozen::kEapIdentityRequestAlice;

TEST(EapCodec, IdentityRequestMatchesDissector) {
    const auto p = Packet::request(1, type::kIdentity, to_bytes("alice"));
    EXPECT_EQ(to_hex(encode_packet(p)), kEapIdentityRequestAlice);
    EXPECT_EQ(decode_packet(from_hex(kEapIdentityRequestAlice)), p);
}

TEST(EapCodec, SuccessIsFourBytes) {
    EXPECT_EQ(to_hex(encode_packet(Packet::success(7))), oracle::frozen::kEapSuccessId7);
    EXPECT_EQ(decode_packet(from_hex("03070004")), Packet::success(7));
}

TEST(EapCodec, RejectsLengthMismatch) {
    EXPECT_THROW(decode_packet(from_hex("03070005")), MalformedPacket);
    EXPECT_THROW(decode_packet(from_hex("0307000400")), MalformedPacket);  // trailing byte
    EXPECT_THROW(decode_packet(from_hex("0101000a01616c6963")), MalformedPacket);
}

TEST(EapCodec, RejectsDegenerateInput) {
    EXPECT_THROW(decode_packet({}), MalformedPacket);
    EXPECT_THROW(decode_packet(from_hex("030700")), MalformedPacket);
    EXPECT_THROW(decode_packet(from_hex("05010004")), MalformedPacket);  // unknown code
    EXPECT_THROW(decode_packet(from_hex("00010004")), MalformedPacket);
    EXPECT_THROW(decode_packet(from_hex("01010004")), MalformedPacket);  // request without type
    EXPECT_THROW(decode_packet(from_hex("0401000501")), MalformedPacket);  // failure with payload
}

TEST(EapCodec, EncodeEnforcesInvariants) {
    EXPECT_THROW(encode_packet(Packet{Code::Success, 1, type::kIdentity, {}}), EncodeError);
    EXPECT_THROW(encode_packet(Packet{Code::Request, 1, std::nullopt, {}}), EncodeError);
    EXPECT_THROW(encode_packet(Packet{Code::Failure, 1, std::nullopt, {1}}), EncodeError);
    EXPECT_NO_THROW(encode_packet(Packet::request(1, 1, Bytes(kMaxTypeData))));
    EXPECT_THROW(encode_packet(Packet::request(1, 1, Bytes(kMaxTypeData + 1))), EncodeError);
}

TEST(EapCodec, LengthFieldMatchesEncodedSize) {
    testing::Gen gen(11);
    for (int i = 0; i < 1000; ++i) {
        const auto p = gen.eap_packet();
        const auto wire = encode_packet(p);
        const std::size_t expected = 4 + (p.type ? 1 + p.type_data.size() : 0);
        ASSERT_EQ(wire.size(), expected);
        ASSERT_EQ(get_u16(wire, 2), expected);
        ASSERT_EQ(decode_packet(wire), p);
    }
}

TEST(EapCodec, DecodeIsTotalOnArbitraryBytes) {
    testing::Gen gen(12);
    for (int i = 0; i < 20000; ++i) {
        const auto raw = gen.bytes_up_to(40);
        try {
            const auto p = decode_packet(raw);
            ASSERT_EQ(get_u16(raw, 2), raw.size());
            ASSERT_EQ(encode_packet(p), raw);
        } catch (const MalformedPacket&) {
        }
    }
}

TEST(EapoUdp, StartFrameLayout) {
    EXPECT_EQ(to_hex(encode_frame(Frame::start())), "01010000");
    EXPECT_EQ(to_hex(encode_frame(Frame::logoff())), "01020000");
    EXPECT_EQ(decode_frame(from_hex("01010000")), Frame::start());
}

TEST(EapoUdp, WrapsSuccess) {
    const auto frame = Frame::carrying(Packet::success(7));
    EXPECT_EQ(to_hex(encode_frame(frame)), oracle::frozen::kEapoudpSuccessFrame);
    EXPECT_EQ(decode_frame(from_hex(oracle::frozen::kEapoudpSuccessFrame)), frame);
}

TEST(EapoUdp, StrictDecode) {
    EXPECT_THROW(decode_frame(from_hex("02000000")), MalformedFrame);          // version
    EXPECT_THROW(decode_frame(from_hex("01040000")), MalformedFrame);          // type
    EXPECT_THROW(decode_frame(from_hex("0100000503070004")), MalformedFrame);  // length
    EXPECT_THROW(decode_frame(from_hex("010100010a")), MalformedFrame);        // Start with body
    EXPECT_THROW(decode_frame(from_hex("0100000403070005")), MalformedFrame);  // bad EAP body
    EXPECT_THROW(decode_frame(from_hex("0100")), MalformedFrame);
    EXPECT_THROW(encode_frame(Frame{FrameType::Logoff, {1}}), EncodeError);
}

TEST(EapoUdp, RoundTripProperty) {
    testing::Gen gen(13);
    for (int i = 0; i < 1000; ++i) {
        const auto f = gen.frame();
        ASSERT_EQ(decode_frame(encode_frame(f)), f);
    }
}

TEST(Md5Challenge, MatchesFrozenVector) {
    const auto r = md5_challenge_response(1, to_bytes("secret"), Bytes(16, 0));
    EXPECT_EQ(to_hex(r), oracle::frozen::kMd5ChapId1Secret);
    EXPECT_EQ(r, md5_challenge_response(1, to_bytes("secret"), Bytes(16, 0)));
}

TEST(Md5Challenge, SingleBitChangesOutput) {
    Bytes challenge(16, 0);
    const auto a = md5_challenge_response(1, to_bytes("secret"), challenge);
    challenge[5] ^= 0x10;
    EXPECT_NE(a, md5_challenge_response(1, to_bytes("secret"), challenge));
}

TEST(Md5Challenge, RejectsBadChallengeLength) {
    EXPECT_THROW(md5_challenge_response(1, to_bytes("pw"), {}), std::invalid_argument);
    EXPECT_THROW(md5_challenge_response(1, to_bytes("pw"), Bytes(256)), std::invalid_argument);
    EXPECT_NO_THROW(md5_challenge_response(1, to_bytes("pw"), Bytes(255)));
}

TEST(Md5Challenge, AgreesWithReferenceMd5) {
    testing::Gen gen(14);
    for (int i = 0; i < 200; ++i) {
        const auto id = gen.byte();
        const auto pw = gen.bytes_up_to(40);
        const auto ch = gen.bytes(gen.uniform(1, 255));
        oracle::Buffer msg{id};
        msg.insert(msg.end(), pw.begin(), pw.end());
        msg.insert(msg.end(), ch.begin(), ch.end());
        ASSERT_EQ(md5_challenge_response(id, pw, ch), oracle::md5(msg));
    }
}

TEST(Md5Challenge, TypeDataLayout) {
    const Bytes value(16, 0xab);
    const auto data = encode_md5_challenge(value, to_bytes("as"));
    ASSERT_EQ(data.size(), 1 + 16 + 2);
    EXPECT_EQ(data[0], 16);
    const auto parsed = decode_md5_challenge(data);
    EXPECT_EQ(parsed.value, value);
    EXPECT_EQ(to_string(parsed.name), "as");
    EXPECT_THROW(decode_md5_challenge(from_hex("10aa")), MalformedPacket);
    EXPECT_THROW(decode_md5_challenge({}), MalformedPacket);
    EXPECT_THROW(decode_md5_challenge(from_hex("00")), MalformedPacket);
}

}  // namespace
}  // namespace xrac::eap
