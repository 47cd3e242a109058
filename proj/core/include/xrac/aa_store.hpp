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

#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "xrac/bytes.hpp"
#include "xrac/crypto.hpp"
#include "xrac/ipv6.hpp"
#include "xrac/radius.hpp"

namespace xrac::store {

struct UserProfile {
    std::string user_name;
    Bytes password;
};

struct RacProfile {
    std::string image_name;
    crypto::Sha256Digest image_digest{};
    std::vector<net::Ipv6Prefix> allowed_peers;
};

struct GroupBinding {
    std::string group_name;
    std::set<std::string, std::less<>> members;
    std::set<std::string, std::less<>> permitted_images;
};

/// The authentication server's AA database: user profiles (UAND), RAC
/// profiles (CAND + CAZD) and group bindings deciding who may run what.
/// Immutable once built; reloading means building a new store.
///
/// Text format:
///
///     # comment
///     user alice { password = "secret" }
///     rac wget {
///         digest = "sha256:<64 hex>"
///         allow = "2001:db8::aa:0"
///         allow = "2001:db8::cc:0/112"
///     }
///     group staff { users = [alice] images = [wget] }
class AaStore {
public:
    AaStore() = default;

    /// Throws ParseError (with file name and line) or DanglingReference.
    static AaStore load(const std::filesystem::path& path);
    static AaStore parse(std::string_view text);

    /// Validates uniqueness and referential integrity.
    static AaStore build(std::vector<UserProfile> users, std::vector<RacProfile> racs,
                         std::vector<GroupBinding> groups);

    const UserProfile* user(std::string_view name) const;
    const RacProfile* rac(std::string_view image) const;

    std::size_t user_count() const noexcept { return users_.size(); }
    std::size_t rac_count() const noexcept { return racs_.size(); }
    std::size_t group_count() const noexcept { return groups_.size(); }
    const std::vector<GroupBinding>& groups() const noexcept { return groups_; }

    /// True iff the user exists and `proof` accepts its stored password.
    /// Unknown users and failed proofs both give false.
    bool verify_user(std::string_view user_name, const std::function<bool(ByteView password)>& proof) const;

    /// True iff the image exists and its stored digest equals `digest`.
    bool verify_image(std::string_view image_name, ByteView digest) const;

    /// True iff some group binds both the user and the image.
    bool permitted(std::string_view user_name, std::string_view image_name) const;

    /// Throws UnknownImage.
    radius::CazdAttributes cazd_for(std::string_view image_name, const net::Ipv6Address& rac_address) const;

private:
    std::map<std::string, UserProfile, std::less<>> users_;
    std::map<std::string, RacProfile, std::less<>> racs_;
    std::vector<GroupBinding> groups_;
};

}  // namespace xrac::store
