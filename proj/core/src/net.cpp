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

#include "xrac/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>

#include "xrac/errors.hpp"

namespace xrac::net {

namespace {

std::string errno_text() { return std::strerror(errno); }

struct Resolved {
    sockaddr_storage addr{};
    socklen_t len = 0;
    int family = AF_UNSPEC;
};

Resolved resolve(const Endpoint& ep, bool passive) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_flags = AI_NUMERICSERV | (passive ? AI_PASSIVE : 0);
    addrinfo* res = nullptr;
    const std::string port = std::to_string(ep.port);
    const int rc = getaddrinfo(ep.host.empty() ? nullptr : ep.host.c_str(), port.c_str(), &hints, &res);
    if (rc != 0 || res == nullptr) {
        throw Error("cannot resolve " + ep.to_string() + ": " + gai_strerror(rc));
    }
    Resolved out;
    std::memcpy(&out.addr, res->ai_addr, res->ai_addrlen);
    out.len = res->ai_addrlen;
    out.family = res->ai_family;
    freeaddrinfo(res);
    return out;
}

Endpoint to_endpoint(const sockaddr_storage& ss) {
    char host[INET6_ADDRSTRLEN] = {};
    if (ss.ss_family == AF_INET6) {
        const auto& sin6 = reinterpret_cast<const sockaddr_in6&>(ss);
        inet_ntop(AF_INET6, &sin6.sin6_addr, host, sizeof(host));
        return {host, ntohs(sin6.sin6_port)};
    }
    const auto& sin = reinterpret_cast<const sockaddr_in&>(ss);
    inet_ntop(AF_INET, &sin.sin_addr, host, sizeof(host));
    return {host, ntohs(sin.sin_port)};
}

Endpoint local_of(int fd) {
    sockaddr_storage ss{};
    socklen_t len = sizeof(ss);
    if (getsockname(fd, reinterpret_cast<sockaddr*>(&ss), &len) != 0) throw Error("getsockname: " + errno_text());
    return to_endpoint(ss);
}

// True when readable; false on timeout.
bool wait_readable(int fd, std::chrono::milliseconds timeout) {
    pollfd pfd{fd, POLLIN, 0};
    for (;;) {
        const int rc = ::poll(&pfd, 1, timeout.count() < 0 ? -1 : static_cast<int>(timeout.count()));
        if (rc < 0 && errno == EINTR) continue;
        if (rc < 0) throw Error("poll: " + errno_text());
        return rc > 0;
    }
}

}  // namespace

Endpoint Endpoint::parse(std::string_view text) {
    std::string_view host;
    std::string_view port;
    if (!text.empty() && text.front() == '[') {
        const auto close = text.find(']');
        if (close == std::string_view::npos || close + 1 >= text.size() || text[close + 1] != ':') {
            throw ParseError("invalid endpoint '" + std::string(text) + "'");
        }
        host = text.substr(1, close - 1);
        port = text.substr(close + 2);
    } else {
        const auto colon = text.rfind(':');
        if (colon == std::string_view::npos || text.find(':') != colon) {
            throw ParseError("invalid endpoint '" + std::string(text) + "' (expected host:port or [v6]:port)");
        }
        host = text.substr(0, colon);
        port = text.substr(colon + 1);
    }
    unsigned value = 0;
    auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
    if (port.empty() || ec != std::errc{} || ptr != port.data() + port.size() || value > 65535) {
        throw ParseError("invalid port in endpoint '" + std::string(text) + "'");
    }
    return {std::string(host), static_cast<std::uint16_t>(value)};
}

std::string Endpoint::to_string() const {
    if (host.find(':') != std::string::npos) return "[" + host + "]:" + std::to_string(port);
    return host + ":" + std::to_string(port);
}

Fd& Fd::operator=(Fd&& other) noexcept {
    if (this != &other) {
        reset();
        fd_ = other.release();
    }
    return *this;
}

int Fd::release() noexcept {
    const int fd = fd_;
    fd_ = -1;
    return fd;
}

void Fd::reset() noexcept {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
}

UdpSocket UdpSocket::bind(const Endpoint& local) {
    const auto r = resolve(local, true);
    Fd fd(::socket(r.family, SOCK_DGRAM | SOCK_CLOEXEC, 0));
    if (!fd.valid()) throw StartupError("socket: " + errno_text());
    if (::bind(fd.get(), reinterpret_cast<const sockaddr*>(&r.addr), r.len) != 0) {
        throw StartupError("cannot bind UDP " + local.to_string() + ": " + errno_text());
    }
    return UdpSocket(std::move(fd));
}

UdpSocket UdpSocket::for_peer(const Endpoint& peer) {
    const auto r = resolve(peer, false);
    Endpoint any{r.family == AF_INET6 ? "::" : "0.0.0.0", 0};
    if (peer.host == "127.0.0.1" || peer.host == "::1" || peer.host == "localhost") {
        any.host = r.family == AF_INET6 ? "::1" : "127.0.0.1";
    }
    return bind(any);
}

void UdpSocket::send_to(ByteView datagram, const Endpoint& peer) {
    const auto r = resolve(peer, false);
    const auto sent = ::sendto(fd_.get(), datagram.data(), datagram.size(), 0,
                               reinterpret_cast<const sockaddr*>(&r.addr), r.len);
    // UDP is best effort; ICMP-induced ECONNREFUSED is not an error for us.
    if (sent < 0 && errno != ECONNREFUSED) throw Error("sendto " + peer.to_string() + ": " + errno_text());
}

std::optional<UdpSocket::Received> UdpSocket::receive(std::chrono::milliseconds timeout) {
    for (;;) {
        if (!wait_readable(fd_.get(), timeout)) return std::nullopt;
        Bytes buf(65536);
        sockaddr_storage ss{};
        socklen_t len = sizeof(ss);
        const auto n = ::recvfrom(fd_.get(), buf.data(), buf.size(), 0, reinterpret_cast<sockaddr*>(&ss), &len);
        if (n < 0) {
            if (errno == EINTR || errno == ECONNREFUSED || errno == EAGAIN) continue;
            throw Error("recvfrom: " + errno_text());
        }
        buf.resize(static_cast<std::size_t>(n));
        return Received{std::move(buf), to_endpoint(ss)};
    }
}

Endpoint UdpSocket::local_endpoint() const { return local_of(fd_.get()); }

LineStream LineStream::connect(const Endpoint& peer, std::chrono::milliseconds timeout) {
    const auto r = resolve(peer, false);
    Fd fd(::socket(r.family, SOCK_STREAM | SOCK_CLOEXEC | SOCK_NONBLOCK, 0));
    if (!fd.valid()) throw Error("socket: " + errno_text());
    if (::connect(fd.get(), reinterpret_cast<const sockaddr*>(&r.addr), r.len) != 0) {
        if (errno != EINPROGRESS) throw Error("cannot connect to " + peer.to_string() + ": " + errno_text());
        pollfd pfd{fd.get(), POLLOUT, 0};
        if (::poll(&pfd, 1, static_cast<int>(timeout.count())) <= 0) {
            throw Error("connect to " + peer.to_string() + " timed out");
        }
        int err = 0;
        socklen_t len = sizeof(err);
        getsockopt(fd.get(), SOL_SOCKET, SO_ERROR, &err, &len);
        if (err != 0) throw Error("cannot connect to " + peer.to_string() + ": " + std::strerror(err));
    }
    const int flags = fcntl(fd.get(), F_GETFL);
    fcntl(fd.get(), F_SETFL, flags & ~O_NONBLOCK);
    return LineStream(std::move(fd));
}

void LineStream::write_line(std::string_view line) {
    std::string out(line);
    out.push_back('\n');
    std::size_t off = 0;
    while (off < out.size()) {
        const auto n = ::send(fd_.get(), out.data() + off, out.size() - off, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw Error("send: " + errno_text());
        }
        off += static_cast<std::size_t>(n);
    }
}

std::optional<std::string> LineStream::read_line(std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
        if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return line;
        }
        auto wait = timeout;
        if (timeout.count() >= 0) {
            wait = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
            if (wait.count() < 0) return std::nullopt;
        }
        if (!wait_readable(fd_.get(), wait)) return std::nullopt;
        char chunk[4096];
        const auto n = ::recv(fd_.get(), chunk, sizeof(chunk), 0);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) return std::nullopt;
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

void LineStream::shutdown() noexcept {
    if (fd_.valid()) ::shutdown(fd_.get(), SHUT_RDWR);
}

TcpListener TcpListener::bind(const Endpoint& local) {
    const auto r = resolve(local, true);
    Fd fd(::socket(r.family, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!fd.valid()) throw StartupError("socket: " + errno_text());
    const int one = 1;
    setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(fd.get(), reinterpret_cast<const sockaddr*>(&r.addr), r.len) != 0) {
        throw StartupError("cannot bind TCP " + local.to_string() + ": " + errno_text());
    }
    if (::listen(fd.get(), 64) != 0) throw StartupError("listen " + local.to_string() + ": " + errno_text());
    return TcpListener(std::move(fd));
}

std::optional<LineStream> TcpListener::accept(std::chrono::milliseconds timeout) {
    if (!fd_.valid()) return std::nullopt;
    if (!wait_readable(fd_.get(), timeout)) return std::nullopt;
    const int fd = ::accept4(fd_.get(), nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) return std::nullopt;
    return LineStream(Fd(fd));
}

Endpoint TcpListener::local_endpoint() const { return local_of(fd_.get()); }

void TcpListener::shutdown() noexcept {
    if (fd_.valid()) ::shutdown(fd_.get(), SHUT_RDWR);
}

}  // namespace xrac::net
