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
#include <cstdint>
#include <initializer_list>
#include <span>

#include "xrac/bytes.hpp"

namespace xrac::crypto {

using Md5Digest = std::array<std::uint8_t, 16>;
using Sha256Digest = std::array<std::uint8_t, 32>;

/// MD5 over the concatenation of `parts`.
Md5Digest md5(std::initializer_list<ByteView> parts);

Md5Digest hmac_md5(ByteView key, ByteView data);

Sha256Digest sha256(ByteView data);

/// Fills `out` from the OpenSSL CSPRNG.
void random_bytes(std::span<std::uint8_t> out);

template <std::size_t N>
std::array<std::uint8_t, N> random_array() {
    std::array<std::uint8_t, N> out{};
    random_bytes(out);
    return out;
}

/// Timing-independent comparison; false when sizes differ.
bool constant_time_equal(ByteView a, ByteView b) noexcept;

}  // namespace xrac::crypto
