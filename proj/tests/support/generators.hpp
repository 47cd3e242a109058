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

// Hand-rolled generators for property tests. Seeded, so failures reproduce.

#include <cstdint>
#include <random>
#include <string>

#include "xrac/eap.hpp"
#include "xrac/ipv6.hpp"
#include "xrac/radius.hpp"

namespace xrac::testing {

class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    std::mt19937_64& rng() { return rng_; }

    std::uint64_t uniform(std::uint64_t lo, std::uint64_t hi) {
        return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng_);
    }
    std::uint8_t byte() { return static_cast<std::uint8_t>(uniform(0, 255)); }
    bool coin() { return uniform(0, 1) == 1; }

    Bytes bytes(std::size_t n) {
        Bytes out(n);
        for (auto& b : out) b = byte();
        return out;
    }
    Bytes bytes_up_to(std::size_t max) { return bytes(uniform(0, max)); }

    template <std::size_t N>
    std::array<std::uint8_t, N> array() {
        std::array<std::uint8_t, N> out{};
        for (auto& b : out) b = byte();
        return out;
    }

    std::string token(std::size_t min_len, std::size_t max_len) {
        static constexpr char kAlphabet[] = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-_.=:/@";
        std::string out(uniform(min_len, max_len), 'x');
        for (auto& c : out) c = kAlphabet[uniform(0, sizeof(kAlphabet) - 2)];
        return out;
    }

    net::Ipv6Address address() { return net::Ipv6Address(array<16>()); }

    net::Ipv6Prefix prefix() { return {address(), static_cast<std::uint8_t>(coin() ? 128 : uniform(0, 128))}; }

    eap::Packet eap_packet(std::size_t max_data = 600) {
        const auto code = static_cast<eap::Code>(uniform(1, 4));
        eap::Packet p{code, byte(), std::nullopt, {}};
        if (code == eap::Code::Request || code == eap::Code::Response) {
            p.type = byte();
            p.type_data = bytes_up_to(max_data);
        }
        return p;
    }

    eap::Frame frame() {
        switch (uniform(0, 3)) {
            case 0: return eap::Frame::start();
            case 1: return eap::Frame::logoff();
            case 2: return eap::Frame::cazd_notify(bytes_up_to(300));
            default: return eap::Frame::carrying(eap_packet());
        }
    }

    /// A packet that encode() accepts. Responses need a request authenticator
    /// at encode time; requests use their own.
    radius::Packet radius_packet() {
        static constexpr radius::Code kCodes[] = {radius::Code::AccessRequest, radius::Code::AccessAccept,
                                                  radius::Code::AccessReject, radius::Code::AccessChallenge};
        radius::Packet p;
        p.code = kCodes[uniform(0, 3)];
        p.identifier = byte();
        p.authenticator = array<16>();
        const auto n = uniform(0, 6);
        for (std::uint64_t i = 0; i < n; ++i) {
            std::uint8_t type = byte();
            while (type == radius::attr::kEapMessage || type == radius::attr::kMessageAuthenticator ||
                   type == radius::attr::kVendorSpecific) {
                type = byte();
            }
            p.attributes.push_back({type, bytes_up_to(80)});
        }
        if (coin()) p.set_eap_message(eap::encode_packet(eap_packet(900)));
        return p;
    }

private:
    std::mt19937_64 rng_;
};

}  // namespace xrac::testing
