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

// Crafts the RADIUS side of a conversation the way an authenticator would,
// so the AS can be exercised without one.

#include <string>

#include "oracle/frozen_vectors.hpp"
#include "xrac/crypto.hpp"
#include "xrac/eap.hpp"
#include "xrac/radius.hpp"

namespace testing_support {

using namespace xrac;

inline crypto::Sha256Digest fixture_digest() {
    crypto::Sha256Digest d{};
    const auto raw = from_hex(oracle::frozen::kFixtureWgetDigest);
    std::copy(raw.begin(), raw.end(), d.begin());
    return d;
}

inline eap::ContainerIdentity identity(std::string user, std::string image = "wget") {
    eap::ContainerIdentity id;
    id.user_name = std::move(user);
    id.image_name = std::move(image);
    id.image_digest = fixture_digest();
    id.rac_address = net::Ipv6Address::parse("2001:db8::11:1");
    return id;
}

inline radius::Packet access_request(std::uint8_t radius_id, const eap::Packet& eap, const Bytes& state = {}) {
    radius::Packet p;
    p.code = radius::Code::AccessRequest;
    p.identifier = radius_id;
    p.authenticator = crypto::random_array<16>();
    p.attributes.push_back({radius::attr::kNasIdentifier, to_bytes("test-ca")});
    if (!state.empty()) p.attributes.push_back({radius::attr::kState, state});
    p.set_eap_message(eap::encode_packet(eap));
    return p;
}

inline radius::Packet identity_request(const eap::ContainerIdentity& id, std::uint8_t eap_id = 1) {
    return access_request(1, eap::Packet::response(eap_id, eap::type::kIdentity,
                                                   to_bytes(eap::encode_container_identity(id))));
}

/// Answers the challenge in `challenge_reply` with `password`.
inline radius::Packet md5_request(const radius::Packet& challenge_reply, std::string_view password) {
    const auto eap = eap::decode_packet(challenge_reply.eap_message());
    const auto data = eap::decode_md5_challenge(eap.type_data);
    const auto value = eap::md5_challenge_response(eap.identifier, to_bytes(password), data.value);
    return access_request(2, eap::Packet::response(eap.identifier, eap::type::kMd5Challenge,
                                                   eap::encode_md5_challenge(value)),
                          challenge_reply.find(radius::attr::kState)->value);
}

}  // namespace testing_support
