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

#include <algorithm>
#include <array>
#include <optional>

#include "xrac/eap.hpp"
#include "xrac/errors.hpp"

namespace xrac::eap {

namespace {

constexpr std::string_view kDigestPrefix = "sha256:";

void check_field(std::string_view name, std::string_view value) {
    if (value.empty()) throw EncodeError("container identity field '" + std::string(name) + "' is empty");
    if (value.find(kIdentitySeparator) != std::string_view::npos) {
        throw EncodeError("container identity field '" + std::string(name) + "' contains ';'");
    }
}

}  // namespace

std::string encode_container_identity(const ContainerIdentity& identity) {
    check_field("user", identity.user_name);
    check_field("image", identity.image_name);
    if (identity.digest_alg != "sha256") throw EncodeError("unsupported digest algorithm " + identity.digest_alg);
    std::string out;
    out += "user=" + identity.user_name;
    out += ";image=" + identity.image_name;
    out += ";digest=sha256:" + to_hex(identity.image_digest);
    out += ";addr=" + identity.rac_address.to_string();
    return out;
}

ContainerIdentity parse_container_identity(std::string_view text) {
    enum Key { kUser, kImage, kDigest, kAddr };
    std::array<std::optional<std::string_view>, 4> fields;

    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto end = std::min(text.find(kIdentitySeparator, pos), text.size());
        const auto item = text.substr(pos, end - pos);
        const auto eq = item.find('=');
        if (eq == std::string_view::npos) throw ParseError("container identity item without '=': " + std::string(item));
        const auto key = item.substr(0, eq);
        int index = -1;
        if (key == "user") index = kUser;
        else if (key == "image") index = kImage;
        else if (key == "digest") index = kDigest;
        else if (key == "addr") index = kAddr;
        if (index < 0) throw ParseError("unknown container identity key '" + std::string(key) + "'");
        if (fields[index]) throw ParseError("duplicate container identity key '" + std::string(key) + "'");
        fields[index] = item.substr(eq + 1);
        pos = end + 1;
    }
    static constexpr const char* kNames[] = {"user", "image", "digest", "addr"};
    for (int i = 0; i < 4; ++i) {
        if (!fields[i]) throw ParseError(std::string("container identity missing '") + kNames[i] + "'");
        if (fields[i]->empty()) throw ParseError(std::string("container identity '") + kNames[i] + "' is empty");
    }

    ContainerIdentity id;
    id.user_name = std::string(*fields[kUser]);
    id.image_name = std::string(*fields[kImage]);

    const auto digest = *fields[kDigest];
    if (digest.substr(0, kDigestPrefix.size()) != kDigestPrefix) {
        throw ParseError("container identity digest must be sha256:<hex>");
    }
    const auto hex = digest.substr(kDigestPrefix.size());
    if (hex.size() != 64) throw ParseError("container identity digest must be 64 hex characters");
    Bytes raw;
    try {
        raw = from_hex(hex);
    } catch (const std::invalid_argument&) {
        throw ParseError("container identity digest is not hex");
    }
    std::copy(raw.begin(), raw.end(), id.image_digest.begin());
    id.rac_address = net::Ipv6Address::parse(*fields[kAddr]);
    return id;
}

}  // namespace xrac::eap
