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

#include "support/generators.hpp"
#include "xrac/eap.hpp"
#include "xrac/errors.hpp"

namespace xrac::eap {
namespace {

ContainerIdentity alice_wget() {
    ContainerIdentity ci;
    ci.user_name = "alice";
    ci.image_name = "wget";
    ci.rac_address = net::Ipv6Address::parse("2001:db8::11:1");
    return ci;
}

TEST(ContainerIdentity, CanonicalEncoding) {
    EXPECT_EQ(encode_container_identity(alice_wget()),
              "user=alice;image=wget;digest=sha256:" + std::string(64, '0') + ";addr=2001:db8::11:1");
}

TEST(ContainerIdentity, AddressIsCanonicalized) {
    const auto ci = parse_container_identity("user=alice;image=wget;digest=sha256:" + std::string(64, 'A') +
                                             ";addr=2001:0DB8:0:0:0:0:0011:0001");
    EXPECT_EQ(ci.rac_address.to_string(), "2001:db8::11:1");
    EXPECT_EQ(encode_container_identity(ci),
              "user=alice;image=wget;digest=sha256:" + std::string(64, 'a') + ";addr=2001:db8::11:1");
}

TEST(ContainerIdentity, KeyOrderIsFree) {
    const auto text = "addr=2001:db8::11:1;digest=sha256:" + std::string(64, '0') + ";image=wget;user=alice";
    EXPECT_EQ(parse_container_identity(text), alice_wget());
}

TEST(ContainerIdentity, ParseErrors) {
    const std::string zeros(64, '0');
    EXPECT_THROW(parse_container_identity("user=alice;image=wget"), ParseError);
    EXPECT_THROW(parse_container_identity(""), ParseError);
    EXPECT_THROW(parse_container_identity("user=alice;image=wget;digest=sha256:abc;addr=2001:db8::11:1"), ParseError);
    EXPECT_THROW(parse_container_identity("user=alice;image=wget;digest=md5:" + zeros + ";addr=::1"), ParseError);
    EXPECT_THROW(parse_container_identity("user=alice;image=wget;digest=sha256:" + std::string(63, '0') + "g;addr=::1"),
                 ParseError);
    EXPECT_THROW(parse_container_identity("user=alice;image=wget;digest=sha256:" + zeros + ";addr=10.0.0.1"),
                 ParseError);
    EXPECT_THROW(parse_container_identity("user=alice;user=bob;image=wget;digest=sha256:" + zeros + ";addr=::1"),
                 ParseError);
    EXPECT_THROW(parse_container_identity("user=alice;image=wget;digest=sha256:" + zeros + ";addr=::1;x=y"),
                 ParseError);
    EXPECT_THROW(parse_container_identity("user=;image=wget;digest=sha256:" + zeros + ";addr=::1"), ParseError);
    EXPECT_THROW(parse_container_identity("user=alice;image=wget;digest=sha256:" + zeros + ";addr=::1;"), ParseError);
}

TEST(ContainerIdentity, SeparatorInFieldRejected) {
    auto ci = alice_wget();
    ci.user_name = "ali;ce";
    EXPECT_THROW(encode_container_identity(ci), EncodeError);
    ci = alice_wget();
    ci.image_name.clear();
    EXPECT_THROW(encode_container_identity(ci), EncodeError);
}

TEST(ContainerIdentity, RoundTripProperty) {
    testing::Gen gen(21);
    for (int i = 0; i < 1000; ++i) {
        ContainerIdentity ci;
        ci.user_name = gen.token(1, 24);
        ci.image_name = gen.token(1, 24);
        ci.image_digest = gen.array<32>();
        ci.rac_address = gen.address();
        ASSERT_EQ(parse_container_identity(encode_container_identity(ci)), ci);
    }
}

}  // namespace
}  // namespace xrac::eap
