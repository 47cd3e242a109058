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
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "xrac/bytes.hpp"
#include "xrac/crypto.hpp"
#include "xrac/eap.hpp"
#include "xrac/ipv6.hpp"
#include "xrac/net.hpp"
#include "xrac/radius.hpp"

/// Host side: images, RAC addresses, and the container supplicant that runs
/// frontend authentication over EAPoUDP.
namespace xrac::host {

using Clock = std::chrono::steady_clock;

crypto::Sha256Digest compute_digest(ByteView blob);

struct ContainerImage {
    std::string image_name;
    Bytes blob;
    crypto::Sha256Digest digest{};
};

/// One file per image; the file name is the image name.
class ImageStore {
public:
    explicit ImageStore(std::filesystem::path directory) : directory_(std::move(directory)) {}

    /// Reads and hashes the image. nullopt if there is no such image.
    std::optional<ContainerImage> load(std::string_view image_name) const;
    bool contains(std::string_view image_name) const;
    std::vector<std::string> names() const;
    const std::filesystem::path& directory() const noexcept { return directory_; }

private:
    std::optional<std::filesystem::path> path_of(std::string_view image_name) const;

    std::filesystem::path directory_;
};

/// Hands out the lowest free address of `subnet`, skipping the subnet's zero
/// address and `reserved` (the host itself).
class AddressAllocator {
public:
    AddressAllocator(net::Ipv6Prefix subnet, std::optional<net::Ipv6Address> reserved);

    std::optional<net::Ipv6Address> allocate();
    void release(const net::Ipv6Address& address);
    bool live(const net::Ipv6Address& address) const;
    const net::Ipv6Prefix& subnet() const noexcept { return subnet_; }

private:
    net::Ipv6Prefix subnet_;
    std::optional<net::Ipv6Address> reserved_;
    mutable std::mutex mutex_;
    std::set<net::Ipv6Address> live_;
    std::uint64_t hint_ = 1;
};

/// Client side of the EAPoUDP conversation, free of I/O.
class CsSession {
public:
    enum class State { Idle, StartSent, IdentitySent, ChallengeAnswered, Authorized, Failed };

    struct Options {
        /// Total transmissions of each frame before giving up.
        int retransmit_budget = 3;
        std::chrono::milliseconds timeout{2000};
        std::function<Clock::time_point()> now = [] { return Clock::now(); };
    };

    CsSession(eap::ContainerIdentity identity, Bytes password, Options options);
    CsSession(eap::ContainerIdentity identity, Bytes password) : CsSession(std::move(identity), std::move(password), Options{}) {}

    /// Emits Start.
    std::vector<eap::Frame> begin();
    std::vector<eap::Frame> on_frame(const eap::Frame& frame);
    std::vector<eap::Frame> tick();

    State state() const noexcept { return state_; }
    bool finished() const noexcept { return state_ == State::Authorized || state_ == State::Failed; }
    /// False until the authenticator has said anything at all.
    bool ca_answered() const noexcept { return ca_answered_; }
    const std::optional<radius::CazdAttributes>& cazd() const noexcept { return cazd_; }
    std::optional<Clock::time_point> deadline() const;
    const std::string& failure() const noexcept { return failure_; }

private:
    std::vector<eap::Frame> send(eap::Frame frame);
    std::vector<eap::Frame> fail(std::string why);
    std::vector<eap::Frame> maybe_authorized();

    eap::ContainerIdentity identity_;
    Bytes password_;
    Options options_;
    State state_ = State::Idle;
    bool ca_answered_ = false;
    bool got_success_ = false;
    std::optional<radius::CazdAttributes> cazd_;
    std::optional<eap::Frame> last_sent_;
    std::optional<std::uint8_t> last_request_id_;
    int remaining_ = 0;
    Clock::time_point deadline_{};
    std::string failure_;
};

const char* to_string(CsSession::State state);

struct CsOutcome {
    bool authorized = false;
    std::optional<radius::CazdAttributes> cazd;
    /// "timeout" if the authenticator never answered, "aa-failed" otherwise.
    std::string deny_reason;
};

/// A supplicant port: one UDP socket toward the authenticator, kept open
/// after authorization so that Logoff comes from the same tuple.
class CsClient {
public:
    explicit CsClient(net::Endpoint authenticator);

    CsOutcome authenticate(const eap::ContainerIdentity& identity, ByteView password,
                           CsSession::Options options = {});
    /// Best effort; the authenticator does not acknowledge Logoff.
    void logoff();

private:
    net::Endpoint authenticator_;
    net::UdpSocket socket_;
};

}  // namespace xrac::host
