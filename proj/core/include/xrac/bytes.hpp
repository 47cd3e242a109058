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

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace xrac {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

Bytes to_bytes(std::string_view text);
std::string to_string(ByteView bytes);

/// Lowercase hex, no separators.
std::string to_hex(ByteView bytes);

/// Accepts upper or lower case. Throws std::invalid_argument on odd length
/// or non-hex characters.
Bytes from_hex(std::string_view hex);

inline void put_u16(Bytes& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
}

inline void put_u32(Bytes& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
}

inline std::uint16_t get_u16(ByteView in, std::size_t off) {
    return static_cast<std::uint16_t>((in[off] << 8) | in[off + 1]);
}

inline std::uint32_t get_u32(ByteView in, std::size_t off) {
    return (std::uint32_t{in[off]} << 24) | (std::uint32_t{in[off + 1]} << 16) |
           (std::uint32_t{in[off + 2]} << 8) | std::uint32_t{in[off + 3]};
}

inline void append(Bytes& out, ByteView more) { out.insert(out.end(), more.begin(), more.end()); }

}  // namespace xrac
