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

#include "xrac/enforcer.hpp"

#include <spdlog/spdlog.h>

#include "json_line.hpp"
#include "xrac/errors.hpp"

namespace xrac::enforcer {

using detail::Json;

Whitelist::Whitelist(std::span<const WhitelistPair> static_pairs) : static_(static_pairs.begin(), static_pairs.end()) {}

void Whitelist::add_static(const WhitelistPair& pair) {
    std::unique_lock lock(mutex_);
    static_.insert(pair);
}

void Whitelist::grant(const std::string& session, const Ipv6Address& rac, std::span<const Ipv6Prefix> peers) {
    if (peers.empty()) return;
    std::unique_lock lock(mutex_);
    auto& held = by_session_[session];
    for (const auto& peer : peers) {
        WhitelistPair pair(Ipv6Prefix::host(rac), peer);
        held.insert(pair);
        dynamic_[pair].insert(session);
    }
    ++mutations_;
}

void Whitelist::revoke(const std::string& session) {
    std::unique_lock lock(mutex_);
    auto it = by_session_.find(session);
    if (it == by_session_.end()) return;
    for (const auto& pair : it->second) {
        auto d = dynamic_.find(pair);
        if (d == dynamic_.end()) continue;
        d->second.erase(session);
        if (d->second.empty()) dynamic_.erase(d);
    }
    by_session_.erase(it);
    ++mutations_;
}

Verdict Whitelist::forward_decision(const Ipv6Address& src, const Ipv6Address& dst) const {
    std::shared_lock lock(mutex_);
    for (const auto& pair : static_)
        if (pair.matches(src, dst)) return Verdict::Allow;
    for (const auto& [pair, holders] : dynamic_)
        if (pair.matches(src, dst)) return Verdict::Allow;
    return Verdict::Drop;
}

std::vector<WhitelistEntry> Whitelist::dump() const {
    std::shared_lock lock(mutex_);
    std::vector<WhitelistEntry> out;
    out.reserve(static_.size() + dynamic_.size());
    for (const auto& pair : static_) out.push_back({pair, true, {}});
    for (const auto& [pair, holders] : dynamic_)
        out.push_back({pair, false, std::vector<std::string>(holders.begin(), holders.end())});
    return out;
}

// --- relay -------------------------------------------------------------------

const char* to_string(FetchStatus status) {
    switch (status) {
        case FetchStatus::Ok: return "ok";
        case FetchStatus::Blocked: return "blocked";
        case FetchStatus::Unreachable: return "unreachable";
        case FetchStatus::BadSource: return "bad-source";
    }
    return "unreachable";
}

std::optional<FetchStatus> fetch_status_from_string(std::string_view text) {
    for (auto s : {FetchStatus::Ok, FetchStatus::Blocked, FetchStatus::Unreachable, FetchStatus::BadSource})
        if (text == to_string(s)) return s;
    return std::nullopt;
}

void Relay::attach(const Ipv6Address& address, std::uint64_t owner, EndpointHandler handler) {
    std::lock_guard lock(mutex_);
    auto [it, inserted] = ports_.try_emplace(address, Port{owner, std::move(handler)});
    if (!inserted) {
        if (it->second.owner != owner) throw Error("address " + address.to_string() + " is attached elsewhere");
        if (handler) it->second.handler = std::move(handler);
    }
}

void Relay::detach(const Ipv6Address& address, std::uint64_t owner) {
    std::lock_guard lock(mutex_);
    auto it = ports_.find(address);
    if (it != ports_.end() && it->second.owner == owner) ports_.erase(it);
}

void Relay::detach_owner(std::uint64_t owner) {
    std::lock_guard lock(mutex_);
    std::erase_if(ports_, [owner](const auto& kv) { return kv.second.owner == owner; });
}

bool Relay::attached(const Ipv6Address& address) const {
    std::lock_guard lock(mutex_);
    return ports_.contains(address);
}

FetchResult Relay::fetch(std::uint64_t owner, const Ipv6Address& src, const Ipv6Address& dst,
                         const std::string& request) {
    if (whitelist_.forward_decision(src, dst) == Verdict::Drop) return {FetchStatus::Blocked, {}};
    EndpointHandler handler;
    {
        std::lock_guard lock(mutex_);
        auto from = ports_.find(src);
        if (from == ports_.end() || from->second.owner != owner) return {FetchStatus::BadSource, {}};
        auto to = ports_.find(dst);
        if (to == ports_.end() || !to->second.handler) return {FetchStatus::Unreachable, {}};
        handler = to->second.handler;
    }
    // the reply path is the same pair, so one decision covers both directions
    auto response = handler(src, request);
    if (!response) return {FetchStatus::Unreachable, {}};
    return {FetchStatus::Ok, std::move(*response)};
}

// --- service -------------------------------------------------------------------

struct EnforcerService::Connection {
    std::shared_ptr<net::LineStream> stream;
    std::thread thread;
    std::atomic<bool> done{false};
};

namespace {

Json entry_to_json(const WhitelistEntry& e) {
    return Json{{"a", e.pair.a().to_string()},
                {"b", e.pair.b().to_string()},
                {"origin", e.is_static ? "static" : "dynamic"},
                {"sessions", e.sessions}};
}

WhitelistEntry entry_from_json(const Json& j) {
    WhitelistEntry e;
    e.pair = WhitelistPair(Ipv6Prefix::parse(j.at("a").get<std::string>()),
                           Ipv6Prefix::parse(j.at("b").get<std::string>()));
    e.is_static = j.at("origin").get<std::string>() == "static";
    e.sessions = j.value("sessions", std::vector<std::string>{});
    return e;
}

/// One delivery to a served endpoint: a fresh connection per request.
std::optional<std::string> deliver(const net::Endpoint& endpoint, const Ipv6Address& src, const std::string& request) {
    try {
        auto stream = net::LineStream::connect(endpoint);
        auto reply = detail::rpc(stream, Json{{"src", src.to_string()}, {"req", request}});
        return reply.at("resp").get<std::string>();
    } catch (const std::exception& e) {
        spdlog::debug("delivery to {} failed: {}", endpoint.to_string(), e.what());
        return std::nullopt;
    }
}

}  // namespace

EnforcerService::EnforcerService(Options options)
    : whitelist_(options.static_pairs),
      data_listener_(net::TcpListener::bind(options.data)),
      control_listener_(net::TcpListener::bind(options.control)),
      data_endpoint_(data_listener_.local_endpoint()),
      control_endpoint_(control_listener_.local_endpoint()) {
    data_thread_ = std::thread([this] { accept_loop(data_listener_, false); });
    control_thread_ = std::thread([this] { accept_loop(control_listener_, true); });
    spdlog::info("enforcer: data {} control {}", data_endpoint_.to_string(), control_endpoint_.to_string());
}

EnforcerService::~EnforcerService() { stop(); }

void EnforcerService::stop() {
    if (stopping_.exchange(true)) return;
    data_listener_.shutdown();
    control_listener_.shutdown();
    if (data_thread_.joinable()) data_thread_.join();
    if (control_thread_.joinable()) control_thread_.join();
    std::vector<std::shared_ptr<Connection>> connections;
    {
        std::lock_guard lock(connections_mutex_);
        connections.swap(connections_);
    }
    for (auto& c : connections) c->stream->shutdown();
    for (auto& c : connections)
        if (c->thread.joinable()) c->thread.join();
}

void EnforcerService::accept_loop(net::TcpListener& listener, bool control) {
    while (!stopping_) {
        auto accepted = listener.accept(std::chrono::milliseconds(200));
        if (!accepted) continue;
        auto conn = std::make_shared<Connection>();
        conn->stream = std::make_shared<net::LineStream>(std::move(*accepted));
        std::lock_guard lock(connections_mutex_);
        if (stopping_) return;
        std::erase_if(connections_, [](const std::shared_ptr<Connection>& c) {
            if (!c->done) return false;
            if (c->thread.joinable()) c->thread.join();
            return true;
        });
        auto owner = next_owner_++;
        conn->thread = std::thread([this, conn, control, owner] {
            try {
                if (control)
                    serve_control(*conn->stream);
                else
                    serve_data(*conn->stream, owner);
            } catch (const std::exception& e) {
                spdlog::debug("enforcer connection closed: {}", e.what());
            }
            if (!control) relay_.detach_owner(owner);
            conn->done = true;
        });
        connections_.push_back(std::move(conn));
    }
}

void EnforcerService::serve_control(net::LineStream& stream) {
    while (auto line = stream.read_line()) {
        Json reply;
        try {
            Json req = Json::parse(*line);
            const auto op = req.at("op").get<std::string>();
            if (op == "grant") {
                std::vector<Ipv6Prefix> peers;
                for (const auto& p : req.at("peers")) peers.push_back(Ipv6Prefix::parse(p.get<std::string>()));
                whitelist_.grant(req.at("session").get<std::string>(),
                                 Ipv6Address::parse(req.at("rac").get<std::string>()), peers);
                reply = detail::ok_reply();
            } else if (op == "revoke") {
                whitelist_.revoke(req.at("session").get<std::string>());
                reply = detail::ok_reply();
            } else if (op == "stats") {
                reply = detail::ok_reply();
                reply["mutations"] = whitelist_.mutation_count();
            } else if (op == "dump") {
                Json pairs = Json::array();
                for (const auto& e : whitelist_.dump()) pairs.push_back(entry_to_json(e));
                reply = detail::ok_reply();
                reply["pairs"] = std::move(pairs);
            } else {
                reply = detail::error_reply("unknown op " + op);
            }
        } catch (const std::exception& e) {
            reply = detail::error_reply(e.what());
        }
        stream.write_line(reply.dump());
    }
}

void EnforcerService::serve_data(net::LineStream& stream, std::uint64_t owner) {
    while (auto line = stream.read_line()) {
        Json reply;
        try {
            Json req = Json::parse(*line);
            const auto op = req.at("op").get<std::string>();
            if (op == "attach") {
                relay_.attach(Ipv6Address::parse(req.at("addr").get<std::string>()), owner);
                reply = detail::ok_reply();
            } else if (op == "detach") {
                relay_.detach(Ipv6Address::parse(req.at("addr").get<std::string>()), owner);
                reply = detail::ok_reply();
            } else if (op == "serve") {
                auto endpoint = net::Endpoint::parse(req.at("endpoint").get<std::string>());
                relay_.attach(Ipv6Address::parse(req.at("addr").get<std::string>()), owner,
                              [endpoint](const Ipv6Address& src, const std::string& request) {
                                  return deliver(endpoint, src, request);
                              });
                reply = detail::ok_reply();
            } else if (op == "fetch") {
                auto result = relay_.fetch(owner, Ipv6Address::parse(req.at("src").get<std::string>()),
                                           Ipv6Address::parse(req.at("dst").get<std::string>()),
                                           req.value("req", std::string()));
                reply = detail::ok_reply();
                reply["status"] = to_string(result.status);
                if (result.status == FetchStatus::Ok) reply["resp"] = std::move(result.response);
            } else {
                reply = detail::error_reply("unknown op " + op);
            }
        } catch (const std::exception& e) {
            reply = detail::error_reply(e.what());
        }
        stream.write_line(reply.dump());
    }
}

// --- clients -------------------------------------------------------------------

std::string ControlClient::call(const std::string& request) {
    std::lock_guard lock(mutex_);
    for (int attempt = 0;; ++attempt) {
        try {
            if (!stream_) stream_.emplace(net::LineStream::connect(endpoint_));
            stream_->write_line(request);
            auto line = stream_->read_line(detail::kRpcTimeout);
            if (!line) throw Error("enforcer closed the control connection");
            return *line;
        } catch (const Error&) {
            stream_.reset();
            if (attempt >= 1) throw;
        }
    }
}

namespace {

Json checked(const std::string& line) {
    Json reply = Json::parse(line, nullptr, false);
    if (reply.is_discarded() || !reply.is_object()) throw Error("unparsable enforcer reply");
    if (!reply.value("ok", false)) throw Error("enforcer: " + reply.value("error", std::string("refused")));
    return reply;
}

}  // namespace

void ControlClient::grant(const std::string& session, const Ipv6Address& rac, std::span<const Ipv6Prefix> peers) {
    Json list = Json::array();
    for (const auto& p : peers) list.push_back(p.to_string());
    checked(call(Json{{"op", "grant"}, {"session", session}, {"rac", rac.to_string()}, {"peers", list}}.dump()));
}

void ControlClient::revoke(const std::string& session) {
    checked(call(Json{{"op", "revoke"}, {"session", session}}.dump()));
}

std::uint64_t ControlClient::mutation_count() {
    return checked(call(Json{{"op", "stats"}}.dump())).at("mutations").get<std::uint64_t>();
}

std::vector<WhitelistEntry> ControlClient::dump() {
    auto reply = checked(call(Json{{"op", "dump"}}.dump()));
    std::vector<WhitelistEntry> out;
    for (const auto& j : reply.at("pairs")) out.push_back(entry_from_json(j));
    return out;
}

DataClient::DataClient(net::Endpoint endpoint) : stream_(net::LineStream::connect(endpoint)) {}

std::string DataClient::call(const std::string& request) {
    std::lock_guard lock(mutex_);
    stream_.write_line(request);
    auto line = stream_.read_line(detail::kRpcTimeout);
    if (!line) throw Error("enforcer closed the data connection");
    return *line;
}

void DataClient::attach(const Ipv6Address& address) {
    checked(call(Json{{"op", "attach"}, {"addr", address.to_string()}}.dump()));
}

void DataClient::detach(const Ipv6Address& address) {
    checked(call(Json{{"op", "detach"}, {"addr", address.to_string()}}.dump()));
}

FetchResult DataClient::fetch(const Ipv6Address& src, const Ipv6Address& dst, const std::string& request) {
    auto reply = checked(
        call(Json{{"op", "fetch"}, {"src", src.to_string()}, {"dst", dst.to_string()}, {"req", request}}.dump()));
    auto status = fetch_status_from_string(reply.at("status").get<std::string>());
    if (!status) throw Error("enforcer: unknown fetch status");
    return {*status, reply.value("resp", std::string())};
}

void DataClient::serve(const Ipv6Address& address, const net::Endpoint& delivery) {
    checked(call(Json{{"op", "serve"}, {"addr", address.to_string()}, {"endpoint", delivery.to_string()}}.dump()));
}

ServedEndpoint::ServedEndpoint(const net::Endpoint& enforcer_data, const Ipv6Address& address, Responder responder,
                               const std::string& bind_host)
    : address_(address),
      responder_(std::move(responder)),
      listener_(net::TcpListener::bind({bind_host, 0})),
      registration_(enforcer_data) {
    thread_ = std::thread([this] { loop(); });
    try {
        registration_.serve(address_, listener_.local_endpoint());
    } catch (...) {
        stopping_ = true;
        listener_.shutdown();
        thread_.join();
        throw;
    }
}

ServedEndpoint::~ServedEndpoint() {
    stopping_ = true;
    listener_.shutdown();
    if (thread_.joinable()) thread_.join();
}

void ServedEndpoint::loop() {
    while (!stopping_) {
        auto accepted = listener_.accept(std::chrono::milliseconds(200));
        if (!accepted) continue;
        // deliveries are short; answer inline
        try {
            auto line = accepted->read_line(detail::kRpcTimeout);
            if (!line) continue;
            Json req = Json::parse(*line);
            auto src = Ipv6Address::parse(req.at("src").get<std::string>());
            Json reply = detail::ok_reply();
            reply["resp"] = responder_(src, req.at("req").get<std::string>());
            accepted->write_line(reply.dump());
        } catch (const std::exception& e) {
            spdlog::debug("served endpoint {}: {}", address_.to_string(), e.what());
        }
    }
}

}  // namespace xrac::enforcer
