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
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "xrac/aa_store.hpp"
#include "xrac/bytes.hpp"
#include "xrac/crypto.hpp"
#include "xrac/eap.hpp"
#include "xrac/net.hpp"
#include "xrac/radius.hpp"

/// The authentication server: a RADIUS server running Identity ->
/// MD5-Challenge and deciding user-authentic AND image-valid AND permitted.
namespace xrac::as {

using Clock = std::chrono::steady_clock;

/// Which check sank a conversation. Logged, never put on the wire.
enum class ReasonClass { Ok, Identity, State, Protocol, User, Image, Permission };

const char* to_string(ReasonClass reason);

struct Decision {
    std::string user_name;
    std::string image_name;
    bool accepted = false;
    ReasonClass reason = ReasonClass::Ok;
};

using DecisionSink = std::function<void(const Decision&)>;

struct AsConversation {
    enum class State { AwaitIdentity, AwaitMd5Response, Done };

    State state = State::AwaitIdentity;
    std::optional<eap::ContainerIdentity> container_identity;
    std::array<std::uint8_t, 16> challenge{};
    Bytes state_token;
    std::uint8_t eap_identifier = 0;
    Clock::time_point last_activity{};
};

class AuthServer {
public:
    struct Options {
        std::chrono::milliseconds conversation_ttl{std::chrono::seconds(30)};
        /// Injectable for tests.
        std::function<Clock::time_point()> now = [] { return Clock::now(); };
    };

    struct Counters {
        std::uint64_t malformed = 0;
        std::uint64_t duplicates = 0;
        std::uint64_t challenges = 0;
        std::uint64_t accepts = 0;
        std::uint64_t rejects = 0;
    };

    explicit AuthServer(std::shared_ptr<const store::AaStore> store);
    AuthServer(std::shared_ptr<const store::AaStore> store, Options options);

    /// Default sink writes one structured log line per decision.
    void set_decision_sink(DecisionSink sink);

    /// Conversations in flight are decided against the new store.
    void reload(std::shared_ptr<const store::AaStore> store);
    std::shared_ptr<const store::AaStore> store() const;

    /// `request` must already be validated (secret, Message-Authenticator).
    /// The reply has the request's identifier and no authenticator yet.
    radius::Packet handle_access_request(const radius::Packet& request);

    /// Decodes, answers and encodes. Malformed or unauthenticated datagrams
    /// are counted and dropped (nullopt). Retransmissions from the same peer
    /// with the same identifier and authenticator get the cached reply.
    std::optional<Bytes> handle_datagram(ByteView datagram, ByteView secret, const std::string& peer);

    /// Drops idle conversations and stale cached replies.
    void expire();

    std::size_t conversation_count() const;
    Counters counters() const;

private:
    radius::Packet reply(const radius::Packet& request, radius::Code code, const eap::Packet& eap,
                         std::vector<radius::Attribute> extra = {});
    radius::Packet reject(const radius::Packet& request, std::uint8_t eap_id, Decision decision);
    radius::Packet on_identity(const radius::Packet& request, const eap::Packet& eap);
    radius::Packet on_md5_response(const radius::Packet& request, const eap::Packet& eap);
    void record(const Decision& decision);

    Options options_;
    mutable std::mutex store_mutex_;
    std::shared_ptr<const store::AaStore> store_;

    mutable std::mutex sink_mutex_;
    DecisionSink sink_;

    mutable std::mutex conversations_mutex_;
    std::map<Bytes, AsConversation> conversations_;

    struct CachedReply {
        Bytes datagram;
        Clock::time_point at;
    };
    mutable std::mutex cache_mutex_;
    std::map<std::string, CachedReply> reply_cache_;

    std::atomic<std::uint64_t> malformed_{0};
    std::atomic<std::uint64_t> duplicates_{0};
    std::atomic<std::uint64_t> challenges_{0};
    std::atomic<std::uint64_t> accepts_{0};
    std::atomic<std::uint64_t> rejects_{0};
};

/// UDP front end. Reloads the store from `store_path` on request_reload() or
/// SIGHUP (once install_sighup_handler() has been called); a reload that
/// fails to parse keeps the previous store.
class AuthService {
public:
    struct Options {
        net::Endpoint bind{"127.0.0.1", 1812};
        std::string secret;
        std::filesystem::path store_path;
    };

    /// Throws StartupError on bind failure or an unloadable store.
    explicit AuthService(Options options);
    ~AuthService();
    AuthService(const AuthService&) = delete;
    AuthService& operator=(const AuthService&) = delete;

    void stop();
    void request_reload() noexcept { reload_requested_ = true; }
    /// Number of reloads applied so far.
    std::uint64_t reload_count() const noexcept { return reloads_.load(); }

    net::Endpoint endpoint() const { return endpoint_; }
    AuthServer& server() noexcept { return server_; }

    static void install_sighup_handler();

private:
    void loop();
    void reload_now();

    Options options_;
    AuthServer server_;
    net::UdpSocket socket_;
    net::Endpoint endpoint_;
    std::atomic<bool> stopping_{false};
    std::atomic<bool> reload_requested_{false};
    std::atomic<std::uint64_t> reloads_{0};
    std::thread thread_;
};

}  // namespace xrac::as
