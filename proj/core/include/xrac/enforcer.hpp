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

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "xrac/ipv6.hpp"
#include "xrac/net.hpp"

/// The network control element: a whitelist of unordered address-pair
/// entries deciding which (src, dst) traffic may pass, plus an
/// application-level relay standing in for the switched data path.
namespace xrac::enforcer {

using net::Ipv6Address;
using net::Ipv6Prefix;

/// Unordered pair; the constructor stores the smaller endpoint first so that
/// {a,b} and {b,a} compare equal.
class WhitelistPair {
public:
    WhitelistPair() = default;
    WhitelistPair(const Ipv6Prefix& x, const Ipv6Prefix& y) : a_(std::min(x, y)), b_(std::max(x, y)) {}

    const Ipv6Prefix& a() const noexcept { return a_; }
    const Ipv6Prefix& b() const noexcept { return b_; }

    bool matches(const Ipv6Address& src, const Ipv6Address& dst) const noexcept {
        return (a_.contains(src) && b_.contains(dst)) || (a_.contains(dst) && b_.contains(src));
    }

    auto operator<=>(const WhitelistPair&) const = default;

private:
    Ipv6Prefix a_;
    Ipv6Prefix b_;
};

enum class Verdict { Allow, Drop };

/// Narrow control surface the authenticator programs. Implemented locally by
/// Whitelist and remotely by ControlClient.
class Control {
public:
    virtual ~Control() = default;
    /// Adds {rac, p} for every p in `peers`, attributed to `session`.
    virtual void grant(const std::string& session, const Ipv6Address& rac, std::span<const Ipv6Prefix> peers) = 0;
    /// Drops every pair `session` holds; pairs other sessions also hold survive.
    virtual void revoke(const std::string& session) = 0;
};

struct WhitelistEntry {
    WhitelistPair pair;
    bool is_static = false;
    std::vector<std::string> sessions;

    bool operator==(const WhitelistEntry&) const = default;
};

/// Static pairs come from configuration and cannot be removed through
/// Control. Dynamic pairs are reference counted by granting session.
/// Queries and mutations are linearizable.
class Whitelist final : public Control {
public:
    Whitelist() = default;
    explicit Whitelist(std::span<const WhitelistPair> static_pairs);

    void add_static(const WhitelistPair& pair);

    void grant(const std::string& session, const Ipv6Address& rac, std::span<const Ipv6Prefix> peers) override;
    void revoke(const std::string& session) override;

    Verdict forward_decision(const Ipv6Address& src, const Ipv6Address& dst) const;

    /// Static entries first, then dynamic ones, each in pair order.
    std::vector<WhitelistEntry> dump() const;

    /// Number of grant/revoke calls that changed the dynamic set.
    std::uint64_t mutation_count() const noexcept { return mutations_.load(); }

private:
    mutable std::shared_mutex mutex_;
    std::set<WhitelistPair> static_;
    std::map<WhitelistPair, std::set<std::string>> dynamic_;
    std::map<std::string, std::set<WhitelistPair>, std::less<>> by_session_;
    std::atomic<std::uint64_t> mutations_{0};
};

// --- relay -------------------------------------------------------------------

enum class FetchStatus { Ok, Blocked, Unreachable, BadSource };

const char* to_string(FetchStatus status);
std::optional<FetchStatus> fetch_status_from_string(std::string_view text);

struct FetchResult {
    FetchStatus status = FetchStatus::Unreachable;
    std::string response;
};

/// Answers a request addressed to an attached endpoint; nullopt when the
/// endpoint cannot be reached.
using EndpointHandler = std::function<std::optional<std::string>(const Ipv6Address& src, const std::string& request)>;

/// Address -> endpoint map. Each address is attached by one owner (a
/// connection, i.e. a switch port); only that owner may send from it.
class Relay {
public:
    explicit Relay(const Whitelist& whitelist) : whitelist_(whitelist) {}

    /// Throws Error when another owner holds the address.
    void attach(const Ipv6Address& address, std::uint64_t owner, EndpointHandler handler = nullptr);
    void detach(const Ipv6Address& address, std::uint64_t owner);
    void detach_owner(std::uint64_t owner);
    bool attached(const Ipv6Address& address) const;

    /// Whitelist first (both directions), then source ownership, then
    /// delivery to the destination endpoint.
    FetchResult fetch(std::uint64_t owner, const Ipv6Address& src, const Ipv6Address& dst, const std::string& request);

private:
    struct Port {
        std::uint64_t owner = 0;
        EndpointHandler handler;
    };

    const Whitelist& whitelist_;
    mutable std::mutex mutex_;
    std::map<Ipv6Address, Port> ports_;
};

// --- service + clients ---------------------------------------------------------

/// Line-delimited JSON over TCP.
///
/// Control socket: {"op":"grant","session":s,"rac":a,"peers":[...]},
/// {"op":"revoke","session":s}, {"op":"dump"}, {"op":"stats"}.
///
/// Data socket: {"op":"attach","addr":a}, {"op":"detach","addr":a},
/// {"op":"serve","addr":a,"endpoint":"host:port"},
/// {"op":"fetch","src":a,"dst":b,"req":t}. Served endpoints receive one
/// connection per delivery carrying {"src":a,"req":t} and answer {"resp":r}.
///
/// Every reply carries "ok"; failures add "error".
class EnforcerService {
public:
    struct Options {
        net::Endpoint data{"127.0.0.1", 0};
        net::Endpoint control{"127.0.0.1", 0};
        std::vector<WhitelistPair> static_pairs;
    };

    /// Binds both sockets; throws StartupError naming the endpoint.
    explicit EnforcerService(Options options);
    ~EnforcerService();
    EnforcerService(const EnforcerService&) = delete;
    EnforcerService& operator=(const EnforcerService&) = delete;

    void stop();

    net::Endpoint data_endpoint() const { return data_endpoint_; }
    net::Endpoint control_endpoint() const { return control_endpoint_; }
    Whitelist& whitelist() noexcept { return whitelist_; }
    Relay& relay() noexcept { return relay_; }

private:
    struct Connection;

    void accept_loop(net::TcpListener& listener, bool control);
    void serve_control(net::LineStream& stream);
    void serve_data(net::LineStream& stream, std::uint64_t owner);

    Whitelist whitelist_;
    Relay relay_{whitelist_};
    net::TcpListener data_listener_;
    net::TcpListener control_listener_;
    net::Endpoint data_endpoint_;
    net::Endpoint control_endpoint_;
    std::atomic<bool> stopping_{false};
    std::atomic<std::uint64_t> next_owner_{1};
    std::mutex connections_mutex_;
    std::vector<std::shared_ptr<Connection>> connections_;
    std::thread data_thread_;
    std::thread control_thread_;
};

/// Remote Control over the control socket. Reconnects on demand; every call
/// throws Error when the enforcer is unreachable or refuses.
class ControlClient final : public Control {
public:
    explicit ControlClient(net::Endpoint endpoint) : endpoint_(std::move(endpoint)) {}

    void grant(const std::string& session, const Ipv6Address& rac, std::span<const Ipv6Prefix> peers) override;
    void revoke(const std::string& session) override;
    std::vector<WhitelistEntry> dump();
    std::uint64_t mutation_count();

private:
    std::string call(const std::string& request);

    net::Endpoint endpoint_;
    std::mutex mutex_;
    std::optional<net::LineStream> stream_;
};

/// Endpoint-side view of the data socket: attach addresses and fetch through
/// the relay. One connection; calls are serialized.
class DataClient {
public:
    /// Throws Error if the enforcer is unreachable.
    explicit DataClient(net::Endpoint endpoint);

    void attach(const Ipv6Address& address);
    void detach(const Ipv6Address& address);
    /// Registers `address` as served: requests to it are delivered to
    /// `delivery`, one connection per request.
    void serve(const Ipv6Address& address, const net::Endpoint& delivery);
    FetchResult fetch(const Ipv6Address& src, const Ipv6Address& dst, const std::string& request);

private:
    std::string call(const std::string& request);

    std::mutex mutex_;
    net::LineStream stream_;
};

/// A simulated server: listens for deliveries on its own loopback port and
/// registers itself for `address` with the enforcer.
class ServedEndpoint {
public:
    using Responder = std::function<std::string(const Ipv6Address& src, const std::string& request)>;

    ServedEndpoint(const net::Endpoint& enforcer_data, const Ipv6Address& address, Responder responder,
                   const std::string& bind_host = "127.0.0.1");
    ~ServedEndpoint();
    ServedEndpoint(const ServedEndpoint&) = delete;
    ServedEndpoint& operator=(const ServedEndpoint&) = delete;

    const Ipv6Address& address() const noexcept { return address_; }

private:
    void loop();

    Ipv6Address address_;
    Responder responder_;
    net::TcpListener listener_;
    DataClient registration_;
    std::atomic<bool> stopping_{false};
    std::thread thread_;
};

}  // namespace xrac::enforcer
