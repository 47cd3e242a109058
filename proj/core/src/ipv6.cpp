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

#include "xrac/ipv6.hpp"

#include <arpa/inet.h>

#include <charconv>

#include "xrac/errors.hpp"

namespace xrac::net {

std::optional<Ipv6Address> Ipv6Address::try_parse(std::string_view text) noexcept {
    if (text.empty() || text.size() >= INET6_ADDRSTRLEN) return std::nullopt;
    char buf[INET6_ADDRSTRLEN] = {};
    text.copy(buf, text.size());
    Octets octets{};
    if (inet_pton(AF_INET6, buf, octets.data()) != 1) return std::nullopt;
    return Ipv6Address(octets);
}

Ipv6Address Ipv6Address::parse(std::string_view text) {
    auto addr = try_parse(text);
    if (!addr) throw ParseError("invalid IPv6 address '" + std::string(text) + "'");
    return *addr;
}

std::string Ipv6Address::to_string() const {
    char buf[INET6_ADDRSTRLEN] = {};
    inet_ntop(AF_INET6, octets_.data(), buf, sizeof(buf));
    return buf;
}

Ipv6Prefix::Ipv6Prefix(const Ipv6Address& address, std::uint8_t length) : length_(length) {
    if (length > 128) throw ParseError("IPv6 prefix length out of range");
    auto octets = address.octets();
    for (std::size_t i = 0; i < octets.size(); ++i) {
        const int bits = static_cast<int>(length) - static_cast<int>(i) * 8;
        if (bits >= 8) continue;
        octets[i] = bits <= 0 ? 0 : static_cast<std::uint8_t>(octets[i] & (0xff << (8 - bits)));
    }
    network_ = Ipv6Address(octets);
}

Ipv6Prefix Ipv6Prefix::parse(std::string_view text) {
    const auto slash = text.find('/');
    if (slash == std::string_view::npos) return host(Ipv6Address::parse(text));
    const auto len_text = text.substr(slash + 1);
    unsigned len = 0;
    auto [ptr, ec] = std::from_chars(len_text.data(), len_text.data() + len_text.size(), len);
    if (len_text.empty() || ec != std::errc{} || ptr != len_text.data() + len_text.size() || len > 128) {
        throw ParseError("invalid IPv6 prefix length in '" + std::string(text) + "'");
    }
    return Ipv6Prefix(Ipv6Address::parse(text.substr(0, slash)), static_cast<std::uint8_t>(len));
}

bool Ipv6Prefix::contains(const Ipv6Address& address) const noexcept {
    const auto& a = address.octets();
    const auto& n = network_.octets();
    int remaining = length_;
    for (std::size_t i = 0; i < a.size() && remaining > 0; ++i, remaining -= 8) {
        const std::uint8_t mask = remaining >= 8 ? 0xff : static_cast<std::uint8_t>(0xff << (8 - remaining));
        if ((a[i] & mask) != n[i]) return false;
    }
    return true;
}

std::string Ipv6Prefix::to_string() const {
    if (length_ == 128) return network_.to_string();
    return network_.to_string() + "/" + std::to_string(length_);
}

}  // namespace xrac::net
