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
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "xrac/enforcer.hpp"
#include "xrac/net.hpp"
#include "xrac/supplicant.hpp"

/// The simulated container management daemon. "Running" a container means
/// holding its address on the enforcer's relay; nothing is executed.
namespace xrac::host {

struct LatencyBreakdown {
    double digest_ms = 0;
    double aa_ms = 0;
    double launch_ms = 0;
    double total_ms = 0;
};

struct ContainerRecord {
    enum class State { Created, AwaitingAuthz, Running, Denied, Stopped };

    std::string container_id;
    std::string image_name;
    std::string user_name;
    std::optional<net::Ipv6Address> rac_address;
    State state = State::Created;
    std::optional<radius::CazdAttributes> cazd;
    /// "no-such-image", "aa-failed", "timeout" or "no-address" when Denied.
    std::string deny_reason;
    LatencyBreakdown latency;
};

const char* to_string(ContainerRecord::State state);
std::optional<ContainerRecord::State> container_state_from_string(std::string_view text);

struct Step2Result {
    bool permitted = false;
    std::string deny_reason;
    /// Kept open while the container runs; Logoff goes out through it.
    std::unique_ptr<CsClient> supplicant;
};

class ContainerManager {
public:
    struct Options {
        net::Ipv6Prefix subnet = net::Ipv6Prefix::parse("2001:db8::11:0/116");
        net::Ipv6Address host_address = net::Ipv6Address::parse("2001:db8::11:fff");
        net::Endpoint authenticator{"::1", 5995};
        std::filesystem::path images;
        /// Where running containers and the host attach. Without it,
        /// containers run detached and fetch() reports unreachable.
        std::optional<net::Endpoint> enforcer_data;
        CsSession::Options supplicant{};
    };

    /// Attaches the host address when an enforcer is configured; throws
    /// StartupError if that fails.
    explicit ContainerManager(Options options);
    ~ContainerManager();
    ContainerManager(const ContainerManager&) = delete;
    ContainerManager& operator=(const ContainerManager&) = delete;

    /// New record in Created. Throws Error for an unknown image.
    std::string create(const std::string& image_name);
    /// Created -> AwaitingAuthz -> Running | Denied. Throws Error if the id
    /// is unknown or not in Created.
    ContainerRecord start(const std::string& container_id, const std::string& user_name, const std::string& password);
    /// create + start.
    ContainerRecord run(const std::string& image_name, const std::string& user_name, const std::string& password);
    /// Running -> Stopped with Logoff. Throws Error for unknown ids or
    /// containers that are not running.
    ContainerRecord stop(const std::string& container_id);
    std::vector<ContainerRecord> list() const;
    std::optional<ContainerRecord> find(const std::string& container_id) const;

    /// Sends from the container's address, or from the host when
    /// `container_id` is empty.
    enforcer::FetchResult fetch(const std::string& container_id, const net::Ipv6Address& dst, const std::string& request);

    /// Minimal first request; never decides.
    bool authorize_step1(const std::string& image_name);
    /// Fills rac_address and cazd of `record` on success.
    Step2Result authorize_step2(const std::string& user_name, const std::string& password, ContainerRecord& record,
                                LatencyBreakdown& latency);

    const net::Ipv6Address& host_address() const noexcept { return options_.host_address; }
    ImageStore& images() noexcept { return images_; }

private:
    struct Live {
        std::unique_ptr<CsClient> supplicant;
        std::shared_ptr<enforcer::DataClient> port;
    };

    Options options_;
    ImageStore images_;
    AddressAllocator addresses_;
    std::shared_ptr<enforcer::DataClient> host_port_;

    mutable std::mutex mutex_;
    std::map<std::string, ContainerRecord> records_;
    std::map<std::string, Live> live_;
    std::set<std::string> busy_;
    std::uint64_t next_id_ = 1;
};

/// Control socket: line-delimited JSON.
/// {"op":"start","image":i,"user":u,"password":p}, {"op":"stop","id":c},
/// {"op":"list"}, {"op":"fetch","from":c|"host","dst":a,"req":t}.
class CmdService {
public:
    CmdService(ContainerManager& manager, const net::Endpoint& control);
    ~CmdService();
    CmdService(const CmdService&) = delete;
    CmdService& operator=(const CmdService&) = delete;

    void stop();
    net::Endpoint endpoint() const { return endpoint_; }

private:
    void accept_loop();
    void serve(net::LineStream& stream);

    ContainerManager& manager_;
    net::TcpListener listener_;
    net::Endpoint endpoint_;
    std::atomic<bool> stopping_{false};
    std::mutex workers_mutex_;
    std::vector<std::pair<std::shared_ptr<net::LineStream>, std::thread>> workers_;
    std::thread thread_;
};

class CmdClient {
public:
    explicit CmdClient(const net::Endpoint& control);

    ContainerRecord start(const std::string& image, const std::string& user, const std::string& password);
    ContainerRecord stop(const std::string& container_id);
    std::vector<ContainerRecord> list();
    /// Empty `from` means the host.
    enforcer::FetchResult fetch(const std::string& from, const net::Ipv6Address& dst, const std::string& request);

private:
    std::string call(const std::string& request);

    std::mutex mutex_;
    net::LineStream stream_;
};

}  // namespace xrac::host
