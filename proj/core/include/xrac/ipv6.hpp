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
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace xrac::net {

class Ipv6Address {
public:
    using Octets = std::array<std::uint8_t, 16>;

    constexpr Ipv6Address() = default;
    constexpr explicit Ipv6Address(const Octets& octets) : octets_(octets) {}

    /// Throws ParseError.
    static Ipv6Address parse(std::string_view text);
    static std::optional<Ipv6Address> try_parse(std::string_view text) noexcept;

    /// Canonical RFC 5952 text (lowercase, longest zero run compressed).
    std::string to_string() const;

    const Octets& octets() const noexcept { return octets_; }

    auto operator<=>(const Ipv6Address&) const = default;

private:
    Octets octets_{};
};

/// An address with a prefix length. Host bits are always zero; a /128
/// prefix stands for a single address.
class Ipv6Prefix {
public:
    Ipv6Prefix() = default;
    Ipv6Prefix(const Ipv6Address& address, std::uint8_t length);

    /// "addr" (implies /128) or "addr/len". Throws ParseError.
    static Ipv6Prefix parse(std::string_view text);

    static Ipv6Prefix host(const Ipv6Address& address) { return {address, 128}; }

    const Ipv6Address& network() const noexcept { return network_; }
    std::uint8_t length() const noexcept { return length_; }

    bool contains(const Ipv6Address& address) const noexcept;

    /// "addr" for /128, "addr/len" otherwise.
    std::string to_string() const;

    auto operator<=>(const Ipv6Prefix&) const = default;

private:
    Ipv6Address network_;
    std::uint8_t length_ = 128;
};

}  // namespace xrac::net
