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

#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "xrac/bytes.hpp"

namespace xrac::net {

/// A transport endpoint ("127.0.0.1:5995", "[::1]:1812").
struct Endpoint {
    std::string host;
    std::uint16_t port = 0;

    /// Throws ParseError. IPv6 literals must be bracketed when a port follows.
    static Endpoint parse(std::string_view text);

    std::string to_string() const;

    auto operator<=>(const Endpoint&) const = default;
};

/// Owning file descriptor.
class Fd {
public:
    Fd() = default;
    explicit Fd(int fd) noexcept : fd_(fd) {}
    Fd(Fd&& other) noexcept : fd_(other.release()) {}
    Fd& operator=(Fd&& other) noexcept;
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    ~Fd() { reset(); }

    int get() const noexcept { return fd_; }
    bool valid() const noexcept { return fd_ >= 0; }
    int release() noexcept;
    void reset() noexcept;

private:
    int fd_ = -1;
};

class UdpSocket {
public:
    /// Binds to `local`; port 0 picks an ephemeral port. Throws StartupError.
    static UdpSocket bind(const Endpoint& local);

    /// Unbound socket for the given peer's address family, bound to an
    /// ephemeral port on first send.
    static UdpSocket for_peer(const Endpoint& peer);

    void send_to(ByteView datagram, const Endpoint& peer);

    struct Received {
        Bytes data;
        Endpoint peer;
    };

    /// Waits up to `timeout`; nullopt on timeout.
    std::optional<Received> receive(std::chrono::milliseconds timeout);

    Endpoint local_endpoint() const;
    int fd() const noexcept { return fd_.get(); }

private:
    explicit UdpSocket(Fd fd) : fd_(std::move(fd)) {}
    Fd fd_;
};

/// A connected TCP stream speaking newline-delimited messages.
class LineStream {
public:
    /// Throws Error when the connection is refused.
    static LineStream connect(const Endpoint& peer, std::chrono::milliseconds timeout = std::chrono::seconds(2));

    explicit LineStream(Fd fd) : fd_(std::move(fd)) {}

    /// Appends '\n'. Throws Error on a broken connection.
    void write_line(std::string_view line);

    /// nullopt on orderly EOF or timeout. A negative timeout waits forever.
    std::optional<std::string> read_line(std::chrono::milliseconds timeout = std::chrono::milliseconds(-1));

    /// Unblocks a reader on another thread.
    void shutdown() noexcept;

    int fd() const noexcept { return fd_.get(); }

private:
    Fd fd_;
    std::string buffer_;
};

class TcpListener {
public:
    /// Throws StartupError naming the endpoint on bind failure.
    static TcpListener bind(const Endpoint& local);

    /// nullopt on timeout or after shutdown().
    std::optional<LineStream> accept(std::chrono::milliseconds timeout);

    Endpoint local_endpoint() const;
    void shutdown() noexcept;

private:
    explicit TcpListener(Fd fd) : fd_(std::move(fd)) {}
    Fd fd_;
};

}  // namespace xrac::net
