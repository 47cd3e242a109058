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

#include "xrac/supplicant.hpp"

#include <fstream>
#include <iterator>

#include <spdlog/spdlog.h>

#include "xrac/errors.hpp"

namespace xrac::host {

crypto::Sha256Digest compute_digest(ByteView blob) { return crypto::sha256(blob); }

// --- images --------------------------------------------------------------------

std::optional<std::filesystem::path> ImageStore::path_of(std::string_view image_name) const {
    if (image_name.empty() || image_name == "." || image_name == ".." ||
        image_name.find_first_of("/\\") != std::string_view::npos)
        return std::nullopt;
    auto p = directory_ / std::string(image_name);
    std::error_code ec;
    if (!std::filesystem::is_regular_file(p, ec)) return std::nullopt;
    return p;
}

bool ImageStore::contains(std::string_view image_name) const { return path_of(image_name).has_value(); }

std::optional<ContainerImage> ImageStore::load(std::string_view image_name) const {
    auto path = path_of(image_name);
    if (!path) return std::nullopt;
    std::ifstream in(*path, std::ios::binary);
    if (!in) return std::nullopt;
    ContainerImage image;
    image.image_name = std::string(image_name);
    image.blob.assign(std::istreambuf_iterator<char>(in), {});
    image.digest = compute_digest(image.blob);
    return image;
}

std::vector<std::string> ImageStore::names() const {
    std::vector<std::string> out;
    std::error_code ec;
    for (const auto& entry : std::filesystem::directory_iterator(directory_, ec))
        if (entry.is_regular_file()) out.push_back(entry.path().filename().string());
    std::sort(out.begin(), out.end());
    return out;
}

// --- addresses -----------------------------------------------------------------

namespace {

net::Ipv6Address add_offset(const net::Ipv6Address& base, std::uint64_t offset) {
    auto octets = base.octets();
    for (int i = 15; i >= 0 && offset; --i) {
        const std::uint64_t sum = octets[static_cast<std::size_t>(i)] + (offset & 0xff);
        octets[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(sum);
        offset = (offset >> 8) + (sum >> 8);
    }
    return net::Ipv6Address(octets);
}

}  // namespace

AddressAllocator::AddressAllocator(net::Ipv6Prefix subnet, std::optional<net::Ipv6Address> reserved)
    : subnet_(subnet), reserved_(reserved) {
    if (subnet_.length() < 64) throw std::invalid_argument("RAC subnet must be /64 or longer");
}

std::optional<net::Ipv6Address> AddressAllocator::allocate() {
    std::lock_guard lock(mutex_);
    const int host_bits = 128 - subnet_.length();
    // a /64 has more addresses than we will ever hand out; bound the scan
    const std::uint64_t size = host_bits >= 20 ? (1u << 20) : (std::uint64_t{1} << host_bits);
    for (std::uint64_t off = std::max<std::uint64_t>(hint_, 1); off < size; ++off) {
        auto candidate = add_offset(subnet_.network(), off);
        if (candidate == reserved_ || live_.contains(candidate)) continue;
        live_.insert(candidate);
        hint_ = off + 1;
        return candidate;
    }
    hint_ = size;
    return std::nullopt;
}

void AddressAllocator::release(const net::Ipv6Address& address) {
    std::lock_guard lock(mutex_);
    if (live_.erase(address) == 0) return;
    // everything below the hint is taken, so the freed slot is the new floor
    std::uint64_t off = 0;
    for (std::size_t i = 8; i < 16; ++i) off = (off << 8) | (address.octets()[i] ^ subnet_.network().octets()[i]);
    hint_ = std::min(hint_, off);
}

bool AddressAllocator::live(const net::Ipv6Address& address) const {
    std::lock_guard lock(mutex_);
    return live_.contains(address);
}

// --- supplicant state machine --------------------------------------------------

const char* to_string(CsSession::State state) {
    switch (state) {
        case CsSession::State::Idle: return "idle";
        case CsSession::State::StartSent: return "start-sent";
        case CsSession::State::IdentitySent: return "identity-sent";
        case CsSession::State::ChallengeAnswered: return "challenge-answered";
        case CsSession::State::Authorized: return "authorized";
        case CsSession::State::Failed: return "failed";
    }
    return "idle";
}

CsSession::CsSession(eap::ContainerIdentity identity, Bytes password, Options options)
    : identity_(std::move(identity)), password_(std::move(password)), options_(std::move(options)) {
    if (options_.retransmit_budget < 1) throw std::invalid_argument("retransmit budget must be at least 1");
}

std::vector<eap::Frame> CsSession::send(eap::Frame frame) {
    last_sent_ = frame;
    remaining_ = options_.retransmit_budget - 1;
    deadline_ = options_.now() + options_.timeout;
    return {std::move(frame)};
}

std::vector<eap::Frame> CsSession::fail(std::string why) {
    state_ = State::Failed;
    failure_ = std::move(why);
    last_sent_.reset();
    return {};
}

std::vector<eap::Frame> CsSession::begin() {
    if (state_ != State::Idle) throw std::logic_error("supplicant session already begun");
    state_ = State::StartSent;
    return send(eap::Frame::start());
}

std::optional<Clock::time_point> CsSession::deadline() const {
    if (finished() || state_ == State::Idle) return std::nullopt;
    return deadline_;
}

std::vector<eap::Frame> CsSession::maybe_authorized() {
    if (!got_success_ || !cazd_) return {};
    state_ = State::Authorized;
    last_sent_.reset();
    return {};
}

std::vector<eap::Frame> CsSession::on_frame(const eap::Frame& frame) {
    if (finished() || state_ == State::Idle) return {};
    ca_answered_ = true;

    if (frame.type == eap::FrameType::CazdNotify) {
        if (state_ != State::ChallengeAnswered) return {};
        radius::CazdAttributes cazd;
        try {
            cazd = radius::parse_cazd(radius::decode_attributes(frame.body));
        } catch (const Error& e) {
            return fail(std::string("bad authorization data: ") + e.what());
        }
        if (cazd.rac_address != identity_.rac_address) return fail("authorization data for another address");
        cazd_ = std::move(cazd);
        // Success may still be in flight; give it the usual window
        deadline_ = options_.now() + options_.timeout;
        remaining_ = 0;
        return maybe_authorized();
    }
    if (frame.type != eap::FrameType::EapPacket) return {};

    const auto eap = eap::decode_packet(frame.body);
    switch (eap.code) {
        case eap::Code::Failure: return fail("authentication failed");
        case eap::Code::Success:
            if (state_ != State::ChallengeAnswered) return fail("premature success");
            got_success_ = true;
            deadline_ = options_.now() + options_.timeout;
            remaining_ = 0;
            return maybe_authorized();
        case eap::Code::Response: return {};
        case eap::Code::Request: break;
    }
    // the authenticator re-asked the same question: repeat our answer
    if (last_request_id_ == eap.identifier && last_sent_ && last_sent_->type == eap::FrameType::EapPacket) {
        auto again = *last_sent_;
        return send(std::move(again));
    }
    last_request_id_ = eap.identifier;
    switch (eap.type.value_or(0)) {
        case eap::type::kIdentity:
            state_ = State::IdentitySent;
            return send(eap::Frame::carrying(eap::Packet::response(
                eap.identifier, eap::type::kIdentity, to_bytes(eap::encode_container_identity(identity_)))));
        case eap::type::kMd5Challenge: {
            if (state_ != State::IdentitySent && state_ != State::ChallengeAnswered) return fail("unexpected challenge");
            eap::Md5ChallengeData challenge;
            try {
                challenge = eap::decode_md5_challenge(eap.type_data);
            } catch (const MalformedPacket&) {
                return fail("malformed challenge");
            }
            if (challenge.value.empty()) return fail("empty challenge");
            state_ = State::ChallengeAnswered;
            const auto value = eap::md5_challenge_response(eap.identifier, password_, challenge.value);
            return send(eap::Frame::carrying(
                eap::Packet::response(eap.identifier, eap::type::kMd5Challenge, eap::encode_md5_challenge(value))));
        }
        case eap::type::kNotification:
            return send(eap::Frame::carrying(eap::Packet::response(eap.identifier, eap::type::kNotification)));
        default:
            // we only speak MD5-Challenge
            return send(eap::Frame::carrying(
                eap::Packet::response(eap.identifier, eap::type::kNak, Bytes{eap::type::kMd5Challenge})));
    }
}

std::vector<eap::Frame> CsSession::tick() {
    if (finished() || state_ == State::Idle || options_.now() < deadline_) return {};
    if (got_success_ || cazd_) return fail("incomplete authorization");
    if (remaining_ > 0 && last_sent_) {
        --remaining_;
        deadline_ = options_.now() + options_.timeout;
        return {*last_sent_};
    }
    return fail(ca_answered_ ? "authenticator went silent" : "no answer from authenticator");
}

// --- UDP client ----------------------------------------------------------------

CsClient::CsClient(net::Endpoint authenticator)
    : authenticator_(std::move(authenticator)), socket_(net::UdpSocket::for_peer(authenticator_)) {}

CsOutcome CsClient::authenticate(const eap::ContainerIdentity& identity, ByteView password,
                                 CsSession::Options options) {
    auto now = options.now;
    CsSession session(identity, Bytes(password.begin(), password.end()), std::move(options));
    auto transmit = [&](const std::vector<eap::Frame>& frames) {
        for (const auto& f : frames) socket_.send_to(eap::encode_frame(f), authenticator_);
    };
    transmit(session.begin());
    while (!session.finished()) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(*session.deadline() - now());
        auto got = socket_.receive(std::max(left, std::chrono::milliseconds(0)));
        if (got) {
            try {
                transmit(session.on_frame(eap::decode_frame(got->data)));
            } catch (const Error& e) {
                spdlog::debug("cs: dropped frame: {}", e.what());
            }
        }
        transmit(session.tick());
    }
    CsOutcome out;
    out.authorized = session.state() == CsSession::State::Authorized;
    if (out.authorized)
        out.cazd = session.cazd();
    else
        out.deny_reason = session.ca_answered() ? "aa-failed" : "timeout";
    if (!out.authorized) spdlog::info("cs: {} for {}: {}", out.deny_reason, identity.image_name, session.failure());
    return out;
}

void CsClient::logoff() {
    try {
        socket_.send_to(eap::encode_frame(eap::Frame::logoff()), authenticator_);
    } catch (const Error& e) {
        spdlog::warn("cs: logoff: {}", e.what());
    }
}

}  // namespace xrac::host
