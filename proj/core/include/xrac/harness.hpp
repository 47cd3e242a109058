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
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "xrac/cmd.hpp"
#include "xrac/enforcer.hpp"
#include "xrac/ipv6.hpp"
#include "xrac/net.hpp"

/// Boots the five services on loopback and runs the reachability and
/// latency scenarios against them.
namespace xrac::harness {

struct TestbedConfig {
    std::string secret = "testing123";
    /// Only for fault injection: the CA's copy of the shared secret.
    std::optional<std::string> ca_secret;

    net::Endpoint as_bind{"127.0.0.1", 0};
    net::Endpoint ca_frontend{"::1", 5995};
    net::Endpoint enforcer_data{"127.0.0.1", 0};
    net::Endpoint enforcer_control{"127.0.0.1", 0};
    net::Endpoint cmd_control{"127.0.0.1", 0};

    std::vector<enforcer::WhitelistPair> static_pairs;
    std::filesystem::path aa_store;
    std::filesystem::path images;

    net::Ipv6Prefix subnet = net::Ipv6Prefix::parse("2001:db8::11:0/116");
    net::Ipv6Address host_address = net::Ipv6Address::parse("2001:db8::11:fff");
    net::Ipv6Address protected_server = net::Ipv6Address::parse("2001:db8::aa:0");
    net::Ipv6Address public_server = net::Ipv6Address::parse("2001:db8::bb:0");
    std::string protected_content = "protected content";
    std::string public_content = "public content";

    std::string user = "alice";
    std::string password = "wonderland";
    std::string image = "wget";

    std::uint64_t seed = 5995;
    std::vector<std::uint64_t> latency_sizes{1'000'000, 6'000'000, 60'000'000};
    int latency_runs = 3;

    /// JSON; relative paths are resolved against the file's directory.
    /// Throws ParseError.
    static TestbedConfig load(const std::filesystem::path& path);
    static TestbedConfig parse(std::string_view json, const std::filesystem::path& base_dir);
};

enum class Mode { InProcess, Distributed };

struct BootOptions {
    Mode mode = Mode::InProcess;
    /// The xrac executable; distributed mode runs each service through it.
    std::filesystem::path executable;
    /// Leaves the AS out; the CA points at a port nobody answers.
    bool as_offline = false;
    std::chrono::milliseconds ready_timeout{10000};
    /// Passed to child services.
    std::string child_log_level = "warn";
};

struct Endpoints {
    net::Endpoint as;
    net::Endpoint ca_frontend;
    net::Endpoint enforcer_data;
    net::Endpoint enforcer_control;
    net::Endpoint cmd_control;
};

/// "ready <name> key=value ..." as printed by a service once it listens.
struct ReadyLine {
    std::string name;
    std::map<std::string, std::string> fields;
};

std::string format_ready(const ReadyLine& ready);
std::optional<ReadyLine> parse_ready(std::string_view line);

class Testbed {
public:
    /// Throws StartupError naming the failing service (and its endpoint
    /// when a bind fails). Partially booted services are torn down.
    static std::unique_ptr<Testbed> boot(const TestbedConfig& config, const BootOptions& options);

    virtual ~Testbed() = default;
    /// Idempotent. Every port is released on return.
    virtual void shutdown() = 0;

    const Endpoints& endpoints() const noexcept { return endpoints_; }
    const TestbedConfig& config() const noexcept { return config_; }

    host::CmdClient& cmd();
    enforcer::ControlClient& enforcer();

protected:
    explicit Testbed(TestbedConfig config) : config_(std::move(config)) {}
    void connect_clients();

    TestbedConfig config_;
    Endpoints endpoints_;
    std::unique_ptr<host::CmdClient> cmd_;
    std::unique_ptr<enforcer::ControlClient> enforcer_;
};

// --- reports -----------------------------------------------------------------------

inline constexpr int kReportSchemaVersion = 1;

struct Probe {
    std::string checkpoint;
    std::string src;
    std::string dst;
    /// "allow" or "blocked"; anything else is itself a deviation.
    std::string result;
    std::string content;
    /// Not part of the reference experiment.
    bool extension = false;
};

struct StartAttempt {
    std::string label;
    std::string container_id;
    std::string outcome;
    std::string reason;
    std::optional<std::string> rac_address;
    std::uint64_t enforcer_mutations = 0;
    /// Dynamic pairs that appeared, as "a <-> b".
    std::vector<std::string> pairs_added;
};

struct LatencySample {
    std::uint64_t size = 0;
    std::vector<host::LatencyBreakdown> runs;
    host::LatencyBreakdown median;
    int reruns = 0;
};

struct ScenarioReport {
    std::string scenario;
    std::string mode;
    std::uint64_t seed = 0;
    std::vector<Probe> probes;
    std::vector<Probe> expected_probes;
    std::vector<StartAttempt> starts;
    std::vector<LatencySample> latency;
    std::vector<std::string> deviations;
    bool passed = false;
    double elapsed_ms = 0;

    /// Schema-versioned JSON document. Everything outside the "timing" and
    /// "latency" members is deterministic for a given config.
    std::string to_json() const;
};

struct ValidationOptions {
    /// Expected outcome flips to "nothing gets authorized".
    bool expect_as_offline = false;
};

ScenarioReport scenario_validation(const TestbedConfig& config, const BootOptions& boot,
                                   const ValidationOptions& options = {});
ScenarioReport scenario_latency(const TestbedConfig& config, const BootOptions& boot);

}  // namespace xrac::harness
