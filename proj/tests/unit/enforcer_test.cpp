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

#include <gtest/gtest.h>

#include <thread>

#include "support/generators.hpp"
#include "xrac/errors.hpp"

namespace xrac::enforcer {
namespace {

Ipv6Address A(const char* s) { return Ipv6Address::parse(s); }
Ipv6Prefix P(const char* s) { return Ipv6Prefix::parse(s); }

const Ipv6Address kRac = A("2001:db8::11:1");
const Ipv6Address kProtected = A("2001:db8::aa:0");
const Ipv6Address kPublic = A("2001:db8::bb:0");

Whitelist testbed_whitelist() {
    const WhitelistPair statics[] = {{P("2001:db8::11:0/116"), P("2001:db8::bb:0")}};
    return Whitelist(statics);
}

TEST(WhitelistPair, IsUnordered) {
    WhitelistPair x(P("2001:db8::1"), P("2001:db8::2"));
    WhitelistPair y(P("2001:db8::2"), P("2001:db8::1"));
    EXPECT_EQ(x, y);
    EXPECT_TRUE(x.matches(A("2001:db8::1"), A("2001:db8::2")));
    EXPECT_TRUE(x.matches(A("2001:db8::2"), A("2001:db8::1")));
    EXPECT_FALSE(x.matches(A("2001:db8::1"), A("2001:db8::3")));
}

TEST(Whitelist, DefaultDropWithStaticPublicAccess) {
    auto wl = testbed_whitelist();
    EXPECT_EQ(wl.forward_decision(kRac, kProtected), Verdict::Drop);
    EXPECT_EQ(wl.forward_decision(kRac, kPublic), Verdict::Allow);
    EXPECT_EQ(wl.forward_decision(kPublic, A("2001:db8::11:ffe")), Verdict::Allow);
    EXPECT_EQ(wl.forward_decision(A("2001:db8::12:0"), kPublic), Verdict::Drop);
}

TEST(Whitelist, GrantThenRevoke) {
    auto wl = testbed_whitelist();
    const Ipv6Prefix peers[] = {Ipv6Prefix::host(kProtected)};
    wl.grant("s1", kRac, peers);
    EXPECT_EQ(wl.forward_decision(kRac, kProtected), Verdict::Allow);
    EXPECT_EQ(wl.forward_decision(kProtected, kRac), Verdict::Allow);
    EXPECT_EQ(wl.forward_decision(A("2001:db8::11:2"), kProtected), Verdict::Drop);
    wl.revoke("s1");
    EXPECT_EQ(wl.forward_decision(kRac, kProtected), Verdict::Drop);
    EXPECT_EQ(wl.forward_decision(kRac, kPublic), Verdict::Allow);
}

TEST(Whitelist, RevokeKeepsPairsHeldByOthers) {
    Whitelist wl;
    const Ipv6Prefix peers[] = {Ipv6Prefix::host(kProtected)};
    wl.grant("s1", kRac, peers);
    wl.grant("s2", kRac, peers);
    wl.revoke("s1");
    EXPECT_EQ(wl.forward_decision(kRac, kProtected), Verdict::Allow);
    auto d = wl.dump();
    ASSERT_EQ(d.size(), 1u);
    EXPECT_EQ(d[0].sessions, std::vector<std::string>{"s2"});
    wl.revoke("s2");
    EXPECT_TRUE(wl.dump().empty());
}

TEST(Whitelist, RevokeUnknownSessionIsNoop) {
    auto wl = testbed_whitelist();
    wl.revoke("nobody");
    EXPECT_EQ(wl.dump().size(), 1u);
    EXPECT_EQ(wl.mutation_count(), 0u);
}

TEST(Whitelist, StaticCannotBeRevoked) {
    auto wl = testbed_whitelist();
    const Ipv6Prefix peers[] = {Ipv6Prefix::host(kPublic)};
    wl.grant("s", kRac, peers);
    wl.revoke("s");
    EXPECT_EQ(wl.forward_decision(kRac, kPublic), Verdict::Allow);
}

TEST(Whitelist, PrefixPeers) {
    Whitelist wl;
    const Ipv6Prefix peers[] = {P("2001:db8:1::/64")};
    wl.grant("s", kRac, peers);
    EXPECT_EQ(wl.forward_decision(kRac, A("2001:db8:1::99")), Verdict::Allow);
    EXPECT_EQ(wl.forward_decision(kRac, A("2001:db8:2::99")), Verdict::Drop);
}

TEST(Whitelist, ConcurrentGrantRevokeAndQuery) {
    Whitelist wl;
    std::atomic<bool> stop{false};
    std::thread reader([&] {
        while (!stop) (void)wl.forward_decision(kRac, kProtected);
    });
    std::vector<std::thread> writers;
    for (int t = 0; t < 4; ++t)
        writers.emplace_back([&, t] {
            const Ipv6Prefix peers[] = {Ipv6Prefix::host(kProtected)};
            for (int i = 0; i < 500; ++i) {
                auto s = "s" + std::to_string(t) + "-" + std::to_string(i);
                wl.grant(s, kRac, peers);
                wl.revoke(s);
            }
        });
    for (auto& w : writers) w.join();
    stop = true;
    reader.join();
    EXPECT_TRUE(wl.dump().empty());
    EXPECT_EQ(wl.forward_decision(kRac, kProtected), Verdict::Drop);
}

TEST(Relay, BlockedBeforeSourceCheck) {
    Whitelist wl;
    Relay relay(wl);
    // not attached at all, but the whitelist verdict comes first
    EXPECT_EQ(relay.fetch(1, kRac, kProtected, "x").status, FetchStatus::Blocked);
}

TEST(Relay, OwnershipAndDelivery) {
    auto wl = testbed_whitelist();
    Relay relay(wl);
    relay.attach(kRac, 1);
    relay.attach(kPublic, 2, [](const Ipv6Address& src, const std::string& req) {
        return std::optional<std::string>(src.to_string() + ":" + req);
    });
    EXPECT_THROW(relay.attach(kRac, 3), Error);
    auto r = relay.fetch(1, kRac, kPublic, "get");
    EXPECT_EQ(r.status, FetchStatus::Ok);
    EXPECT_EQ(r.response, "2001:db8::11:1:get");
    EXPECT_EQ(relay.fetch(3, kRac, kPublic, "get").status, FetchStatus::BadSource);
    relay.detach_owner(2);
    EXPECT_EQ(relay.fetch(1, kRac, kPublic, "get").status, FetchStatus::Unreachable);
}

class EnforcerServiceTest : public ::testing::Test {
protected:
    EnforcerService service{{{"127.0.0.1", 0}, {"127.0.0.1", 0}, {{P("2001:db8::11:0/116"), P("2001:db8::bb:0")}}}};
};

TEST_F(EnforcerServiceTest, ControlRoundTrip) {
    ControlClient control(service.control_endpoint());
    const Ipv6Prefix peers[] = {Ipv6Prefix::host(kProtected)};
    control.grant("sess", kRac, peers);
    auto d = control.dump();
    ASSERT_EQ(d.size(), 2u);
    EXPECT_TRUE(d[0].is_static);
    EXPECT_FALSE(d[1].is_static);
    EXPECT_EQ(d[1].pair, WhitelistPair(Ipv6Prefix::host(kRac), Ipv6Prefix::host(kProtected)));
    EXPECT_EQ(d[1].sessions, std::vector<std::string>{"sess"});
    EXPECT_EQ(d, service.whitelist().dump());
    control.revoke("sess");
    EXPECT_EQ(control.dump().size(), 1u);
}

TEST_F(EnforcerServiceTest, FetchThroughServedEndpoint) {
    ServedEndpoint prot(service.data_endpoint(), kProtected, [](auto&, auto&) { return "protected content"; });
    ServedEndpoint pub(service.data_endpoint(), kPublic, [](auto&, auto&) { return "public content"; });
    DataClient rac(service.data_endpoint());
    rac.attach(kRac);

    EXPECT_EQ(rac.fetch(kRac, kProtected, "GET").status, FetchStatus::Blocked);
    auto ok = rac.fetch(kRac, kPublic, "GET");
    EXPECT_EQ(ok.status, FetchStatus::Ok);
    EXPECT_EQ(ok.response, "public content");

    const Ipv6Prefix peers[] = {Ipv6Prefix::host(kProtected)};
    service.whitelist().grant("s", kRac, peers);
    EXPECT_EQ(rac.fetch(kRac, kProtected, "GET").response, "protected content");

    // spoofing another container's address
    EXPECT_EQ(rac.fetch(A("2001:db8::11:2"), kPublic, "GET").status, FetchStatus::BadSource);
}

TEST_F(EnforcerServiceTest, AttachmentsDieWithConnection) {
    {
        DataClient rac(service.data_endpoint());
        rac.attach(kRac);
        EXPECT_TRUE(service.relay().attached(kRac));
    }
    for (int i = 0; i < 100 && service.relay().attached(kRac); ++i)
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    EXPECT_FALSE(service.relay().attached(kRac));
}

TEST_F(EnforcerServiceTest, BadRequestsGetErrors) {
    ControlClient control(service.control_endpoint());
    const Ipv6Prefix none[] = {Ipv6Prefix::host(kProtected)};
    EXPECT_NO_THROW(control.grant("s", kRac, none));
    auto stream = net::LineStream::connect(service.control_endpoint());
    stream.write_line("{not json");
    auto reply = stream.read_line(std::chrono::seconds(2));
    ASSERT_TRUE(reply);
    EXPECT_NE(reply->find("\"ok\":false"), std::string::npos);
}

TEST(EnforcerStartup, BindConflictNamesEndpoint) {
    EnforcerService first({{"127.0.0.1", 0}, {"127.0.0.1", 0}, {}});
    try {
        EnforcerService second({first.data_endpoint(), {"127.0.0.1", 0}, {}});
        FAIL();
    } catch (const StartupError& e) {
        EXPECT_NE(std::string(e.what()).find(first.data_endpoint().to_string()), std::string::npos);
    }
}

TEST(ControlClientTest, UnreachableThrows) {
    auto port = net::TcpListener::bind({"127.0.0.1", 0}).local_endpoint();
    ControlClient control(port);
    EXPECT_THROW(control.revoke("x"), Error);
}

}  // namespace
}  // namespace xrac::enforcer
