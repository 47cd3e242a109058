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

#include "xrac/harness.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include "support/live_stack.hpp"
#include "xrac/errors.hpp"

namespace xrac::harness {
namespace {

using testing_support::kFixtureDir;

TestbedConfig fixture_config() { return TestbedConfig::load(kFixtureDir / "testbed.json"); }

BootOptions distributed() {
    BootOptions b;
    b.mode = Mode::Distributed;
    b.executable = XRAC_EXE;
    return b;
}

// Everything the testbed bound must be bindable again once it is gone.
void expect_rebindable(const Endpoints& e) {
    for (const auto* ep : {&e.enforcer_data, &e.enforcer_control, &e.cmd_control})
        EXPECT_NO_THROW(net::TcpListener::bind(*ep)) << ep->to_string();
    for (const auto* ep : {&e.as, &e.ca_frontend}) EXPECT_NO_THROW(net::UdpSocket::bind(*ep)) << ep->to_string();
}

std::string without_timing(const ScenarioReport& r) {
    auto j = nlohmann::json::parse(r.to_json());
    j.erase("timing");
    return j.dump();
}

TEST(TestbedConfig, ResolvesRelativePathsAgainstTheFile) {
    const auto c = fixture_config();
    EXPECT_EQ(c.aa_store, kFixtureDir / "aa_store.conf");
    EXPECT_EQ(c.images, kFixtureDir / "images");
    EXPECT_EQ(c.ca_frontend.port, 0);
    EXPECT_EQ(c.user, "alice");
    ASSERT_EQ(c.static_pairs.size(), 1u);
}

TEST(TestbedConfig, RejectsTyposAndMissingPaths) {
    EXPECT_THROW(TestbedConfig::parse(R"({"aa_store":"a","images":"i","secrte":"x"})", "/"), ParseError);
    EXPECT_THROW(TestbedConfig::parse(R"({"images":"i"})", "/"), ParseError);
    EXPECT_THROW(TestbedConfig::parse(R"({"aa_store":"a","images":"i","endpoints":{"as":"nope"}})", "/"), ParseError);
    EXPECT_THROW(TestbedConfig::parse(R"({"aa_store":"a","images":"i","static_pairs":[["::1"]]})", "/"), ParseError);
    EXPECT_THROW(TestbedConfig::parse("[1,2]", "/"), ParseError);
    EXPECT_THROW(TestbedConfig::parse("{", "/"), ParseError);
    const auto c = TestbedConfig::parse(R"({"aa_store":"/abs/store","images":"imgs","ca_secret":"x"})", "/base");
    EXPECT_EQ(c.aa_store, "/abs/store");
    EXPECT_EQ(c.images, "/base/imgs");
    EXPECT_EQ(c.ca_secret, "x");
}

TEST(ReadyLine, RoundTrips) {
    ReadyLine r{"enforcer", {{"data", "127.0.0.1:4000"}, {"control", "[::1]:4001"}}};
    const auto text = format_ready(r);
    EXPECT_EQ(text, "ready enforcer control=[::1]:4001 data=127.0.0.1:4000");
    auto back = parse_ready(text);
    ASSERT_TRUE(back);
    EXPECT_EQ(back->name, "enforcer");
    EXPECT_EQ(back->fields, r.fields);
    EXPECT_FALSE(parse_ready("error cannot bind"));
    EXPECT_FALSE(parse_ready("ready"));
    EXPECT_FALSE(parse_ready("ready as junk"));
}

TEST(Testbed, BootTeardownTwentyTimesLeaksNoPorts) {
    const auto config = fixture_config();
    for (int i = 0; i < 20; ++i) {
        auto bed = Testbed::boot(config, {});
        const auto endpoints = bed->endpoints();
        EXPECT_NE(endpoints.ca_frontend.port, 0);
        EXPECT_TRUE(bed->cmd().list().empty());
        bed.reset();
        expect_rebindable(endpoints);
    }
}

TEST(Testbed, FixedPortsAreReusableAcrossBoots) {
    auto config = fixture_config();
    const auto probe = [] { return net::TcpListener::bind({"127.0.0.1", 0}).local_endpoint(); };
    config.enforcer_control = probe();
    config.cmd_control = probe();
    config.ca_frontend = net::UdpSocket::bind({"::1", 0}).local_endpoint();
    for (int i = 0; i < 5; ++i) {
        auto bed = Testbed::boot(config, {});
        EXPECT_EQ(bed->endpoints().enforcer_control, config.enforcer_control);
        EXPECT_EQ(bed->endpoints().ca_frontend, config.ca_frontend);
    }
}

TEST(Testbed, DistributedBootTeardownLeaksNoPorts) {
    const auto config = fixture_config();
    for (int i = 0; i < 3; ++i) {
        auto bed = Testbed::boot(config, distributed());
        const auto endpoints = bed->endpoints();
        EXPECT_TRUE(bed->cmd().list().empty());
        bed.reset();
        expect_rebindable(endpoints);
    }
}

TEST(Testbed, PortConflictNamesThePort) {
    auto config = fixture_config();
    auto squatter = net::TcpListener::bind({"127.0.0.1", 0});
    config.cmd_control = squatter.local_endpoint();
    const auto port = std::to_string(config.cmd_control.port);
    for (const auto& boot : {BootOptions{}, distributed()}) {
        try {
            Testbed::boot(config, boot);
            ADD_FAILURE() << "boot succeeded on a taken port";
        } catch (const StartupError& e) {
            EXPECT_NE(std::string(e.what()).find(port), std::string::npos) << e.what();
            EXPECT_NE(std::string(e.what()).find("cmd"), std::string::npos) << e.what();
        }
    }

    auto udp = net::UdpSocket::bind({"::1", 0});
    config = fixture_config();
    config.ca_frontend = udp.local_endpoint();
    try {
        Testbed::boot(config, {});
        ADD_FAILURE() << "boot succeeded on a taken UDP port";
    } catch (const StartupError& e) {
        EXPECT_NE(std::string(e.what()).find(std::to_string(config.ca_frontend.port)), std::string::npos) << e.what();
    }
}

TEST(Testbed, SecretMismatchDeniesWithAaFailed) {
    auto config = fixture_config();
    config.ca_secret = "not-" + config.secret;
    auto bed = Testbed::boot(config, {});
    const auto mutations = bed->enforcer().mutation_count();
    const auto r = bed->cmd().start("wget", "alice", "wonderland");
    EXPECT_EQ(r.state, host::ContainerRecord::State::Denied);
    EXPECT_EQ(r.deny_reason, "aa-failed");
    EXPECT_EQ(bed->enforcer().mutation_count(), mutations);
}

TEST(Scenario, ValidationPassesInProcess) {
    const auto r = scenario_validation(fixture_config(), {});
    EXPECT_TRUE(r.passed);
    EXPECT_TRUE(r.deviations.empty()) << r.to_json();
    ASSERT_EQ(r.starts.size(), 2u);
    EXPECT_EQ(r.starts[0].outcome, "denied");
    EXPECT_EQ(r.starts[0].enforcer_mutations, 0u);
    EXPECT_EQ(r.starts[1].pairs_added, std::vector<std::string>{"2001:db8::11:1 <-> 2001:db8::aa:0"});
}

TEST(Scenario, ValidationPassesDistributed) {
    const auto r = scenario_validation(fixture_config(), distributed());
    EXPECT_TRUE(r.passed) << r.to_json();
    EXPECT_EQ(r.mode, "distributed");
}

TEST(Scenario, BackToBackRunsAreIdentical) {
    const auto config = fixture_config();
    const auto a = scenario_validation(config, {});
    const auto b = scenario_validation(config, {});
    EXPECT_EQ(without_timing(a), without_timing(b));
}

TEST(Scenario, AsOfflineKeepsThePreAuthMatrix) {
    BootOptions boot;
    boot.as_offline = true;
    const auto r = scenario_validation(fixture_config(), boot, {true});
    EXPECT_TRUE(r.passed) << r.to_json();
    ASSERT_EQ(r.starts.size(), 2u);
    EXPECT_EQ(r.starts[1].outcome, "denied");
    EXPECT_EQ(r.starts[1].enforcer_mutations, 0u);
    for (const auto& p : r.probes) EXPECT_NE(p.src, "rac");
}

TEST(Scenario, OverbroadStaticPairIsReportedAsDeviation) {
    auto config = fixture_config();
    config.static_pairs.emplace_back(net::Ipv6Prefix::parse("2001:db8::11:fff"),
                                     net::Ipv6Prefix::parse("2001:db8::aa:0"));
    const auto r = scenario_validation(config, {});
    EXPECT_FALSE(r.passed);
    const auto has = [&](const std::string& needle) {
        return std::any_of(r.deviations.begin(), r.deviations.end(),
                           [&](const std::string& d) { return d.find(needle) != std::string::npos; });
    };
    EXPECT_TRUE(has("expected pre-auth host->protected = blocked, observed pre-auth host->protected = allow"))
        << r.to_json();
}

TEST(Scenario, LatencySmallSizesIncludingEmpty) {
    auto config = fixture_config();
    config.latency_sizes = {0, 4096, 2'000'000};
    config.latency_runs = 1;
    const auto r = scenario_latency(config, {});
    EXPECT_TRUE(r.deviations.empty()) << r.to_json();
    ASSERT_EQ(r.latency.size(), 3u);
    EXPECT_EQ(r.latency[0].size, 0u);
    ASSERT_EQ(r.latency[0].runs.size(), 1u);
    for (const auto& s : r.latency) {
        const auto& m = s.median;
        EXPECT_NEAR(m.digest_ms + m.aa_ms + m.launch_ms, m.total_ms, 5.0);
    }
}

}  // namespace
}  // namespace xrac::harness
