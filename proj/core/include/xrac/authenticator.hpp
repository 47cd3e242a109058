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
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "xrac/bytes.hpp"
#include "xrac/eap.hpp"
#include "xrac/enforcer.hpp"
#include "xrac/net.hpp"
#include "xrac/radius.hpp"

/// The container authenticator: EAPoUDP toward supplicants, RADIUS toward the
/// AS, EAP relayed untouched in both directions, and on Accept the
/// authorization data pushed to the enforcer and the supplicant.
namespace xrac::ca {

using Clock = std::chrono::steady_clock;

struct CaSession {
    enum class State { Idle, Relaying, Authorized, Failed };

    net::Endpoint peer;
    State state = State::Idle;
    std::uint8_t last_radius_id = 0;
    Bytes radius_state_token;
    int retransmit_budget = 3;
    Clock::time_point timer_deadline{};

    /// Enforcer grants are filed under this id.
    std::string session_id;
    std::uint8_t last_eap_identifier = 0;
    bool awaiting_backend = false;
    radius::Authenticator request_authenticator{};
    Bytes pending_request;
    Bytes pending_eap;
    std::vector<net::Ipv6Prefix> granted_peers;
    std::optional<net::Ipv6Address> rac_address;
};

const char* to_string(CaSession::State state);

struct Outbound {
    std::vector<std::pair<net::Endpoint, eap::Frame>> frontend;
    std::vector<Bytes> backend;

    void append(Outbound&& other);
};

class Authenticator {
public:
    struct Options {
        std::string secret;
        std::string nas_identifier = "xrac-ca";
        /// Total AccessRequest transmissions before giving up.
        int retransmit_budget = 3;
        std::chrono::milliseconds retransmit_interval{2000};
        std::function<Clock::time_point()> now = [] { return Clock::now(); };
    };

    struct Counters {
        std::uint64_t unknown_peer_frames = 0;
        std::uint64_t malformed_frontend = 0;
        std::uint64_t malformed_backend = 0;
        std::uint64_t unmatched_backend = 0;
        std::uint64_t retransmits = 0;
        std::uint64_t authorized = 0;
        std::uint64_t failed = 0;
        std::uint64_t timeouts = 0;
    };

    /// `enforcer` must outlive the authenticator.
    Authenticator(Options options, enforcer::Control& enforcer);

    Outbound handle_frontend_frame(const eap::Frame& frame, const net::Endpoint& peer);
    /// Undecodable frames are counted and dropped.
    Outbound handle_frontend_datagram(ByteView datagram, const net::Endpoint& peer);
    /// Datagrams matching no outstanding request, or failing authentication,
    /// are counted and dropped.
    Outbound handle_backend_datagram(ByteView datagram);
    Outbound retransmit_tick();

    std::optional<CaSession> session(const net::Endpoint& peer) const;
    std::size_t session_count() const;
    /// Earliest retransmit deadline, if any request is outstanding.
    std::optional<Clock::time_point> next_deadline() const;
    Counters counters() const;

private:
    Outbound start(const net::Endpoint& peer);
    Outbound relay_response(CaSession& s, const Bytes& eap_bytes, std::uint8_t eap_id);
    Outbound logoff(const net::Endpoint& peer);
    Outbound on_accept(CaSession& s, const radius::Packet& reply);
    Outbound fail(CaSession& s, std::uint8_t eap_id, const char* why);
    void release_radius_id(CaSession& s);
    void teardown(CaSession& s);
    std::optional<std::uint8_t> allocate_radius_id(const net::Endpoint& peer);

    Options options_;
    Bytes secret_;
    enforcer::Control& enforcer_;

    mutable std::mutex mutex_;
    std::map<net::Endpoint, CaSession> sessions_;
    std::map<std::uint8_t, net::Endpoint> outstanding_;
    std::uint8_t next_radius_id_ = 0;
    std::uint64_t session_counter_ = 0;
    Counters counters_;
};

/// Both sockets served from one event loop thread.
class CaService {
public:
    struct Options {
        net::Endpoint frontend{"::", 5995};
        net::Endpoint auth_server;
        std::string secret;
        net::Endpoint enforcer_control;
        Authenticator::Options tuning{};
    };

    /// Throws StartupError on bind failure.
    explicit CaService(Options options);
    ~CaService();
    CaService(const CaService&) = delete;
    CaService& operator=(const CaService&) = delete;

    void stop();
    net::Endpoint frontend_endpoint() const { return frontend_endpoint_; }
    Authenticator& authenticator() noexcept { return authenticator_; }

private:
    void loop();
    void flush(Outbound&& out);

    Options options_;
    enforcer::ControlClient enforcer_;
    Authenticator authenticator_;
    net::UdpSocket frontend_;
    net::UdpSocket backend_;
    net::Endpoint frontend_endpoint_;
    std::atomic<bool> stopping_{false};
    std::thread thread_;
};

}  // namespace xrac::ca
