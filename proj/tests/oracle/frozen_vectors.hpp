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

// Values produced by tests/oracle/gen_vectors.py (scapy EAP dissector, pyrad,
// hashlib/hmac). Regenerate with:
//   python3 tests/oracle/gen_vectors.py tests/fixtures/images/wget

namespace xrac::oracle::frozen {

inline constexpr const char* kEapIdentityRequestAlice = "0101000a01616c696365";
inline constexpr const char* kEapSuccessId7 = "03070004";
inline constexpr const char* kEapoudpSuccessFrame = "0100000403070004";

// MD5(0x01 | "secret" | 16 x 0x00)
inline constexpr const char* kMd5ChapId1Secret = "7570c653cdf4755ccffcaa80f29268d1";

inline constexpr const char* kSha256Empty = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855";
inline constexpr const char* kSha256Abc = "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad";

// Access-Accept, id 42, no attributes, answering request authenticator
// 00 01 .. 0f, secret "testing123" (pyrad ReplyPacket).
inline constexpr const char* kRadiusAccept = "022a0014b7021c538b0fe2e565c5ae0de07ee65e";

// Access-Challenge, id 42, State = aa x16, EAP-Message = Request/MD5-Challenge
// (id 2, 16 zero bytes), Message-Authenticator; same request authenticator
// and secret. Verified by pyrad VerifyReply.
inline constexpr const char* kRadiusChallenge =
    "0b2a0050253cb773488d2753d3064e7ac465a18b1812aaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa4f18010200160410000000000000000000"
    "000000000000005012df5a6e05327cdd4cd167a65429b111a3";

// SHA-256 of tests/fixtures/images/wget.
inline constexpr const char* kFixtureWgetDigest = "78fac0f080f5965054871b41921a3acdc395825c03dada7607cc6b07d8a24147";

}  // namespace xrac::oracle::frozen
