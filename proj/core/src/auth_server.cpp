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

#include "xrac/auth_server.hpp"

#include <csignal>

#include <spdlog/spdlog.h>

#include "xrac/errors.hpp"

namespace xrac::as {

namespace {

std::atomic<bool> g_sighup{false};

extern "C" void on_sighup(int) { g_sighup = true; }

std::string cache_key(const std::string& peer, const radius::Packet& request) {
    std::string key = peer;
    key.push_back('|');
    key.push_back(static_cast<char>(request.identifier));
    key.append(request.authenticator.begin(), request.authenticator.end());
    return key;
}

void log_decision(const Decision& d) {
    spdlog::info("decision user={} image={} outcome={} reason={}", d.user_name.empty() ? "-" : d.user_name,
                 d.image_name.empty() ? "-" : d.image_name, d.accepted ? "accept" : "reject", to_string(d.reason));
}

}  // namespace

const char* to_string(ReasonClass reason) {
    switch (reason) {
        case ReasonClass::Ok: return "ok";
        case ReasonClass::Identity: return "identity";
        case ReasonClass::State: return "state";
        case ReasonClass::Protocol: return "protocol";
        case ReasonClass::User: return "user";
        case ReasonClass::Image: return "image";
        case ReasonClass::Permission: return "permission";
    }
    return "protocol";
}

AuthServer::AuthServer(std::shared_ptr<const store::AaStore> store) : AuthServer(std::move(store), Options{}) {}

AuthServer::AuthServer(std::shared_ptr<const store::AaStore> store, Options options)
    : options_(std::move(options)), store_(std::move(store)), sink_(log_decision) {
    if (!store_) throw std::invalid_argument("AuthServer needs a store");
}

void AuthServer::set_decision_sink(DecisionSink sink) {
    std::lock_guard lock(sink_mutex_);
    sink_ = std::move(sink);
}

void AuthServer::reload(std::shared_ptr<const store::AaStore> store) {
    if (!store) throw std::invalid_argument("AuthServer needs a store");
    std::lock_guard lock(store_mutex_);
    store_ = std::move(store);
}

std::shared_ptr<const store::AaStore> AuthServer::store() const {
    std::lock_guard lock(store_mutex_);
    return store_;
}

void AuthServer::record(const Decision& decision) {
    (decision.accepted ? accepts_ : rejects_)++;
    std::lock_guard lock(sink_mutex_);
    if (sink_) sink_(decision);
}

radius::Packet AuthServer::reply(const radius::Packet& request, radius::Code code, const eap::Packet& eap,
                                 std::vector<radius::Attribute> extra) {
    radius::Packet out;
    out.code = code;
    out.identifier = request.identifier;
    out.set_eap_message(eap::encode_packet(eap));
    for (auto& a : extra) out.attributes.push_back(std::move(a));
    return out;
}

radius::Packet AuthServer::reject(const radius::Packet& request, std::uint8_t eap_id, Decision decision) {
    decision.accepted = false;
    record(decision);
    return reply(request, radius::Code::AccessReject, eap::Packet::failure(eap_id));
}

radius::Packet AuthServer::handle_access_request(const radius::Packet& request) {
    eap::Packet eap;
    try {
        eap = eap::decode_packet(request.eap_message());
    } catch (const MalformedPacket&) {
        return reject(request, 0, {{}, {}, false, ReasonClass::Protocol});
    }
    if (eap.code != eap::Code::Response || !eap.type)
        return reject(request, eap.identifier, {{}, {}, false, ReasonClass::Protocol});
    if (*eap.type == eap::type::kIdentity) return on_identity(request, eap);
    if (*eap.type == eap::type::kMd5Challenge) return on_md5_response(request, eap);
    // Nak or an unsupported method: nothing else is on offer
    Decision d{{}, {}, false, ReasonClass::Protocol};
    if (const auto* state = request.find(radius::attr::kState)) {
        std::lock_guard lock(conversations_mutex_);
        auto it = conversations_.find(state->value);
        if (it != conversations_.end()) {
            it->second.state = AsConversation::State::Done;
            if (it->second.container_identity) {
                d.user_name = it->second.container_identity->user_name;
                d.image_name = it->second.container_identity->image_name;
            }
        }
    }
    return reject(request, eap.identifier, std::move(d));
}

radius::Packet AuthServer::on_identity(const radius::Packet& request, const eap::Packet& eap) {
    AsConversation conv;
    try {
        conv.container_identity = eap::parse_container_identity(xrac::to_string(eap.type_data));
    } catch (const ParseError& e) {
        spdlog::debug("identity rejected: {}", e.what());
        return reject(request, eap.identifier, {{}, {}, false, ReasonClass::Identity});
    }
    conv.state = AsConversation::State::AwaitMd5Response;
    conv.challenge = crypto::random_array<16>();
    conv.eap_identifier = static_cast<std::uint8_t>(eap.identifier + 1);
    conv.last_activity = options_.now();

    auto challenge = eap::Packet::request(conv.eap_identifier, eap::type::kMd5Challenge,
                                          eap::encode_md5_challenge(conv.challenge));
    {
        std::lock_guard lock(conversations_mutex_);
        do {
            auto token = crypto::random_array<16>();
            conv.state_token.assign(token.begin(), token.end());
        } while (conversations_.contains(conv.state_token));
        conversations_.emplace(conv.state_token, conv);
    }
    ++challenges_;
    return reply(request, radius::Code::AccessChallenge, challenge, {{radius::attr::kState, conv.state_token}});
}

radius::Packet AuthServer::on_md5_response(const radius::Packet& request, const eap::Packet& eap) {
    const auto* state = request.find(radius::attr::kState);
    if (!state) return reject(request, eap.identifier, {{}, {}, false, ReasonClass::State});

    AsConversation conv;
    {
        std::lock_guard lock(conversations_mutex_);
        auto it = conversations_.find(state->value);
        if (it == conversations_.end() || it->second.state != AsConversation::State::AwaitMd5Response)
            return reject(request, eap.identifier, {{}, {}, false, ReasonClass::State});
        // one shot: whatever happens below, the token is spent
        it->second.state = AsConversation::State::Done;
        it->second.last_activity = options_.now();
        conv = it->second;
    }
    const auto& id = *conv.container_identity;
    Decision d{id.user_name, id.image_name, false, ReasonClass::Ok};
    if (eap.identifier != conv.eap_identifier) {
        d.reason = ReasonClass::Protocol;
        return reject(request, eap.identifier, std::move(d));
    }
    eap::Md5ChallengeData response;
    try {
        response = eap::decode_md5_challenge(eap.type_data);
    } catch (const MalformedPacket&) {
        d.reason = ReasonClass::Protocol;
        return reject(request, eap.identifier, std::move(d));
    }

    auto store = this->store();
    // evaluate every conjunct so timing says nothing about which one failed
    const bool user_ok = store->verify_user(id.user_name, [&](ByteView password) {
        auto expected = eap::md5_challenge_response(conv.eap_identifier, password, conv.challenge);
        return crypto::constant_time_equal(expected, response.value);
    });
    const bool image_ok = store->verify_image(id.image_name, id.image_digest);
    const bool permitted = store->permitted(id.user_name, id.image_name);

    if (!user_ok) d.reason = ReasonClass::User;
    else if (!image_ok) d.reason = ReasonClass::Image;
    else if (!permitted) d.reason = ReasonClass::Permission;
    if (d.reason != ReasonClass::Ok) return reject(request, eap.identifier, std::move(d));

    std::vector<radius::Attribute> cazd;
    try {
        cazd = radius::encode_cazd(store->cazd_for(id.image_name, id.rac_address));
    } catch (const Error& e) {
        spdlog::warn("no authorization data for {}: {}", id.image_name, e.what());
        d.reason = ReasonClass::Image;
        return reject(request, eap.identifier, std::move(d));
    }
    d.accepted = true;
    record(d);
    return reply(request, radius::Code::AccessAccept, eap::Packet::success(eap.identifier), std::move(cazd));
}

std::optional<Bytes> AuthServer::handle_datagram(ByteView datagram, ByteView secret, const std::string& peer) {
    radius::Packet request;
    try {
        request = radius::decode_request(datagram, secret);
    } catch (const Error& e) {
        ++malformed_;
        spdlog::debug("dropped datagram from {}: {}", peer, e.what());
        return std::nullopt;
    }
    if (!request.has(radius::attr::kEapMessage)) {
        ++malformed_;
        return std::nullopt;
    }
    const auto key = cache_key(peer, request);
    {
        std::lock_guard lock(cache_mutex_);
        auto it = reply_cache_.find(key);
        if (it != reply_cache_.end()) {
            ++duplicates_;
            return it->second.datagram;
        }
    }
    auto response = radius::encode(handle_access_request(request), secret, request.authenticator);
    std::lock_guard lock(cache_mutex_);
    reply_cache_[key] = {response, options_.now()};
    return response;
}

void AuthServer::expire() {
    const auto now = options_.now();
    const auto horizon = now - options_.conversation_ttl;
    {
        std::lock_guard lock(conversations_mutex_);
        std::erase_if(conversations_, [&](const auto& kv) { return kv.second.last_activity < horizon; });
    }
    std::lock_guard lock(cache_mutex_);
    std::erase_if(reply_cache_, [&](const auto& kv) { return kv.second.at < horizon; });
}

std::size_t AuthServer::conversation_count() const {
    std::lock_guard lock(conversations_mutex_);
    return conversations_.size();
}

AuthServer::Counters AuthServer::counters() const {
    return {malformed_.load(), duplicates_.load(), challenges_.load(), accepts_.load(), rejects_.load()};
}

// --- service -------------------------------------------------------------------

namespace {

std::shared_ptr<const store::AaStore> load_store(const std::filesystem::path& path) {
    try {
        return std::make_shared<const store::AaStore>(store::AaStore::load(path));
    } catch (const std::exception& e) {
        throw StartupError("cannot load store " + path.string() + ": " + e.what());
    }
}

}  // namespace

AuthService::AuthService(Options options)
    : options_(std::move(options)),
      server_(load_store(options_.store_path)),
      socket_(net::UdpSocket::bind(options_.bind)),
      endpoint_(socket_.local_endpoint()) {
    thread_ = std::thread([this] { loop(); });
    spdlog::info("as: listening on {} store {}", endpoint_.to_string(), options_.store_path.string());
}

AuthService::~AuthService() { stop(); }

void AuthService::stop() {
    stopping_ = true;
    if (thread_.joinable()) thread_.join();
}

void AuthService::install_sighup_handler() { std::signal(SIGHUP, on_sighup); }

void AuthService::reload_now() {
    try {
        server_.reload(std::make_shared<const store::AaStore>(store::AaStore::load(options_.store_path)));
        ++reloads_;
        spdlog::info("as: store reloaded from {}", options_.store_path.string());
    } catch (const std::exception& e) {
        spdlog::error("as: reload failed, keeping previous store: {}", e.what());
    }
}

void AuthService::loop() {
    const auto secret = to_bytes(options_.secret);
    auto last_expiry = Clock::now();
    while (!stopping_) {
        if (reload_requested_.exchange(false) || g_sighup.exchange(false)) reload_now();
        auto received = socket_.receive(std::chrono::milliseconds(100));
        if (received) {
            if (auto reply = server_.handle_datagram(received->data, secret, received->peer.to_string()))
                socket_.send_to(*reply, received->peer);
        }
        if (Clock::now() - last_expiry > std::chrono::seconds(1)) {
            server_.expire();
            last_expiry = Clock::now();
        }
    }
}

}  // namespace xrac::as
