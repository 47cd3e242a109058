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

#include "xrac/authenticator.hpp"

#include <poll.h>

#include <spdlog/spdlog.h>

#include "xrac/crypto.hpp"
#include "xrac/errors.hpp"

namespace xrac::ca {

const char* to_string(CaSession::State state) {
    switch (state) {
        case CaSession::State::Idle: return "idle";
        case CaSession::State::Relaying: return "relaying";
        case CaSession::State::Authorized: return "authorized";
        case CaSession::State::Failed: return "failed";
    }
    return "idle";
}

void Outbound::append(Outbound&& other) {
    for (auto& f : other.frontend) frontend.push_back(std::move(f));
    for (auto& b : other.backend) backend.push_back(std::move(b));
}

Authenticator::Authenticator(Options options, enforcer::Control& enforcer)
    : options_(std::move(options)), secret_(to_bytes(options_.secret)), enforcer_(enforcer) {
    if (options_.retransmit_budget < 1) throw std::invalid_argument("retransmit budget must be at least 1");
}

Outbound Authenticator::handle_frontend_datagram(ByteView datagram, const net::Endpoint& peer) {
    eap::Frame frame;
    try {
        frame = eap::decode_frame(datagram);
    } catch (const Error& e) {
        std::lock_guard lock(mutex_);
        ++counters_.malformed_frontend;
        spdlog::debug("ca: bad frame from {}: {}", peer.to_string(), e.what());
        return {};
    }
    return handle_frontend_frame(frame, peer);
}

Outbound Authenticator::handle_frontend_frame(const eap::Frame& frame, const net::Endpoint& peer) {
    std::lock_guard lock(mutex_);
    switch (frame.type) {
        case eap::FrameType::Start: return start(peer);
        case eap::FrameType::Logoff: return logoff(peer);
        case eap::FrameType::EapPacket: break;
        case eap::FrameType::CazdNotify:
            ++counters_.malformed_frontend;
            return {};
    }
    auto it = sessions_.find(peer);
    if (it == sessions_.end()) {
        ++counters_.unknown_peer_frames;
        return {};
    }
    auto& s = it->second;
    if (s.state == CaSession::State::Authorized || s.state == CaSession::State::Failed) {
        ++counters_.unknown_peer_frames;
        return {};
    }
    // decode_frame already checked well-formedness
    const auto eap = eap::decode_packet(frame.body);
    if (eap.code != eap::Code::Response) {
        ++counters_.malformed_frontend;
        return {};
    }
    if (s.awaiting_backend && s.pending_eap == frame.body) return {};  // we retransmit on our own schedule
    return relay_response(s, frame.body, eap.identifier);
}

Outbound Authenticator::start(const net::Endpoint& peer) {
    auto it = sessions_.find(peer);
    if (it != sessions_.end()) {
        spdlog::info("ca: session peer={} replaced (was {})", peer.to_string(), to_string(it->second.state));
        teardown(it->second);
        sessions_.erase(it);
    }
    CaSession s;
    s.peer = peer;
    s.retransmit_budget = options_.retransmit_budget;
    s.session_id = peer.to_string() + "#" + std::to_string(++session_counter_);
    s.last_eap_identifier = crypto::random_array<1>()[0];
    Outbound out;
    out.frontend.emplace_back(peer, eap::Frame::carrying(eap::Packet::request(s.last_eap_identifier, eap::type::kIdentity)));
    spdlog::info("ca: session {} started", s.session_id);
    sessions_.emplace(peer, std::move(s));
    return out;
}

std::optional<std::uint8_t> Authenticator::allocate_radius_id(const net::Endpoint& peer) {
    for (int i = 0; i < 256; ++i) {
        const std::uint8_t id = next_radius_id_++;
        if (!outstanding_.contains(id)) {
            outstanding_.emplace(id, peer);
            return id;
        }
    }
    return std::nullopt;
}

void Authenticator::release_radius_id(CaSession& s) {
    if (!s.awaiting_backend) return;
    auto it = outstanding_.find(s.last_radius_id);
    if (it != outstanding_.end() && it->second == s.peer) outstanding_.erase(it);
    s.awaiting_backend = false;
    s.pending_request.clear();
    s.pending_eap.clear();
}

void Authenticator::teardown(CaSession& s) {
    release_radius_id(s);
    if (s.state != CaSession::State::Authorized) return;
    try {
        enforcer_.revoke(s.session_id);
        spdlog::info("ca: session {} revoked", s.session_id);
    } catch (const std::exception& e) {
        spdlog::error("ca: revoke for {} failed: {}", s.session_id, e.what());
    }
}

Outbound Authenticator::relay_response(CaSession& s, const Bytes& eap_bytes, std::uint8_t eap_id) {
    release_radius_id(s);
    auto id = allocate_radius_id(s.peer);
    if (!id) {
        spdlog::warn("ca: no free RADIUS identifier, dropping response from {}", s.peer.to_string());
        return {};
    }
    radius::Packet req;
    req.code = radius::Code::AccessRequest;
    req.identifier = *id;
    req.authenticator = crypto::random_array<16>();
    req.attributes.push_back({radius::attr::kNasIdentifier, to_bytes(options_.nas_identifier)});
    if (!s.radius_state_token.empty()) req.attributes.push_back({radius::attr::kState, s.radius_state_token});
    req.set_eap_message(eap_bytes);

    s.state = CaSession::State::Relaying;
    s.last_radius_id = *id;
    s.last_eap_identifier = eap_id;
    s.request_authenticator = req.authenticator;
    s.pending_request = radius::encode(req, secret_);
    s.pending_eap = eap_bytes;
    s.awaiting_backend = true;
    s.retransmit_budget = options_.retransmit_budget - 1;
    s.timer_deadline = options_.now() + options_.retransmit_interval;

    Outbound out;
    out.backend.push_back(s.pending_request);
    return out;
}

Outbound Authenticator::logoff(const net::Endpoint& peer) {
    auto it = sessions_.find(peer);
    if (it == sessions_.end()) {
        ++counters_.unknown_peer_frames;
        return {};
    }
    spdlog::info("ca: session {} logoff", it->second.session_id);
    teardown(it->second);
    sessions_.erase(it);
    return {};
}

Outbound Authenticator::fail(CaSession& s, std::uint8_t eap_id, const char* why) {
    release_radius_id(s);
    s.state = CaSession::State::Failed;
    ++counters_.failed;
    spdlog::info("ca: session {} failed ({})", s.session_id, why);
    Outbound out;
    out.frontend.emplace_back(s.peer, eap::Frame::carrying(eap::Packet::failure(eap_id)));
    return out;
}

Outbound Authenticator::handle_backend_datagram(ByteView datagram) {
    std::lock_guard lock(mutex_);
    if (datagram.size() < radius::kHeaderSize) {
        ++counters_.malformed_backend;
        return {};
    }
    auto owner = outstanding_.find(datagram[1]);
    if (owner == outstanding_.end()) {
        ++counters_.unmatched_backend;
        return {};
    }
    auto& s = sessions_.at(owner->second);
    radius::Packet reply;
    try {
        reply = radius::decode(datagram, secret_, s.request_authenticator);
    } catch (const Error& e) {
        ++counters_.malformed_backend;
        spdlog::warn("ca: dropped AS reply for {}: {}", s.session_id, e.what());
        return {};
    }
    const std::uint8_t eap_id = s.last_eap_identifier;
    release_radius_id(s);
    const Bytes eap = reply.eap_message();

    switch (reply.code) {
        case radius::Code::AccessChallenge: {
            if (const auto* state = reply.find(radius::attr::kState)) s.radius_state_token = state->value;
            Outbound out;
            out.frontend.emplace_back(s.peer, eap::Frame::carrying_encoded(eap));
            return out;
        }
        case radius::Code::AccessAccept: return on_accept(s, reply);
        case radius::Code::AccessReject: {
            s.state = CaSession::State::Failed;
            ++counters_.failed;
            spdlog::info("ca: session {} rejected", s.session_id);
            Outbound out;
            if (eap.empty())
                out.frontend.emplace_back(s.peer, eap::Frame::carrying(eap::Packet::failure(eap_id)));
            else
                out.frontend.emplace_back(s.peer, eap::Frame::carrying_encoded(eap));
            return out;
        }
        case radius::Code::AccessRequest: break;
    }
    ++counters_.malformed_backend;
    return {};
}

Outbound Authenticator::on_accept(CaSession& s, const radius::Packet& reply) {
    const Bytes eap = reply.eap_message();
    std::uint8_t eap_id = s.last_eap_identifier;
    if (!eap.empty()) eap_id = eap[1];

    radius::CazdAttributes cazd;
    try {
        cazd = radius::parse_cazd(reply.attributes);
    } catch (const Error&) {
        return fail(s, eap_id, "unparseable authorization data");
    }
    if (!cazd.rac_address) return fail(s, eap_id, "authorization data without RAC address");
    if (!cazd.allowed_peers.empty()) {
        try {
            enforcer_.grant(s.session_id, *cazd.rac_address, cazd.allowed_peers);
        } catch (const std::exception& e) {
            spdlog::error("ca: grant for {} failed: {}", s.session_id, e.what());
            return fail(s, eap_id, "enforcer unavailable");
        }
    }
    s.state = CaSession::State::Authorized;
    s.rac_address = cazd.rac_address;
    s.granted_peers = cazd.allowed_peers;
    ++counters_.authorized;
    spdlog::info("ca: session {} authorized rac={} peers={}", s.session_id, cazd.rac_address->to_string(),
                 cazd.allowed_peers.size());

    std::vector<radius::Attribute> vsas;
    for (const auto& a : reply.attributes)
        if (a.type == radius::attr::kVendorSpecific) vsas.push_back(a);
    Outbound out;
    out.frontend.emplace_back(s.peer, eap.empty() ? eap::Frame::carrying(eap::Packet::success(eap_id))
                                                  : eap::Frame::carrying_encoded(eap));
    out.frontend.emplace_back(s.peer, eap::Frame::cazd_notify(radius::encode_attributes(vsas)));
    return out;
}

Outbound Authenticator::retransmit_tick() {
    std::lock_guard lock(mutex_);
    const auto now = options_.now();
    Outbound out;
    for (auto& [peer, s] : sessions_) {
        if (!s.awaiting_backend || s.timer_deadline > now) continue;
        if (s.retransmit_budget > 0) {
            --s.retransmit_budget;
            s.timer_deadline = now + options_.retransmit_interval;
            ++counters_.retransmits;
            out.backend.push_back(s.pending_request);
            continue;
        }
        ++counters_.timeouts;
        out.append(fail(s, s.last_eap_identifier, "authentication server timeout"));
    }
    return out;
}

std::optional<CaSession> Authenticator::session(const net::Endpoint& peer) const {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(peer);
    if (it == sessions_.end()) return std::nullopt;
    return it->second;
}

std::size_t Authenticator::session_count() const {
    std::lock_guard lock(mutex_);
    return sessions_.size();
}

std::optional<Clock::time_point> Authenticator::next_deadline() const {
    std::lock_guard lock(mutex_);
    std::optional<Clock::time_point> best;
    for (const auto& [peer, s] : sessions_)
        if (s.awaiting_backend && (!best || s.timer_deadline < *best)) best = s.timer_deadline;
    return best;
}

Authenticator::Counters Authenticator::counters() const {
    std::lock_guard lock(mutex_);
    return counters_;
}

// --- service -------------------------------------------------------------------

namespace {

Authenticator::Options with_secret(Authenticator::Options tuning, const std::string& secret) {
    tuning.secret = secret;
    return tuning;
}

}  // namespace

CaService::CaService(Options options)
    : options_(std::move(options)),
      enforcer_(options_.enforcer_control),
      authenticator_(with_secret(options_.tuning, options_.secret), enforcer_),
      frontend_(net::UdpSocket::bind(options_.frontend)),
      backend_(net::UdpSocket::for_peer(options_.auth_server)),
      frontend_endpoint_(frontend_.local_endpoint()) {
    thread_ = std::thread([this] { loop(); });
    spdlog::info("ca: frontend {} as {} enforcer {}", frontend_endpoint_.to_string(),
                 options_.auth_server.to_string(), options_.enforcer_control.to_string());
}

CaService::~CaService() { stop(); }

void CaService::stop() {
    stopping_ = true;
    if (thread_.joinable()) thread_.join();
}

void CaService::flush(Outbound&& out) {
    for (const auto& [peer, frame] : out.frontend) frontend_.send_to(eap::encode_frame(frame), peer);
    for (const auto& d : out.backend) backend_.send_to(d, options_.auth_server);
}

void CaService::loop() {
    while (!stopping_) {
        auto wait = std::chrono::milliseconds(100);
        if (auto deadline = authenticator_.next_deadline()) {
            auto until = std::chrono::duration_cast<std::chrono::milliseconds>(*deadline - Clock::now());
            wait = std::clamp(until + std::chrono::milliseconds(1), std::chrono::milliseconds(0), wait);
        }
        pollfd fds[2] = {{frontend_.fd(), POLLIN, 0}, {backend_.fd(), POLLIN, 0}};
        const int ready = ::poll(fds, 2, static_cast<int>(wait.count()));
        try {
            if (ready > 0 && (fds[0].revents & POLLIN)) {
                while (auto got = frontend_.receive(std::chrono::milliseconds(0)))
                    flush(authenticator_.handle_frontend_datagram(got->data, got->peer));
            }
            if (ready > 0 && (fds[1].revents & POLLIN)) {
                while (auto got = backend_.receive(std::chrono::milliseconds(0)))
                    flush(authenticator_.handle_backend_datagram(got->data));
            }
            flush(authenticator_.retransmit_tick());
        } catch (const std::exception& e) {
            spdlog::error("ca: {}", e.what());
        }
    }
}

}  // namespace xrac::ca
