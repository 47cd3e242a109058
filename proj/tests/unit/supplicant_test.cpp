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

#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "oracle/frozen_vectors.hpp"
#include "oracle/reference_hashes.hpp"
#include "support/as_driver.hpp"
#include "support/live_stack.hpp"

namespace xrac::host {
namespace {

using namespace testing_support;

TEST(ComputeDigest, ReferenceVectors) {
    EXPECT_EQ(to_hex(compute_digest({})), oracle::frozen::kSha256Empty);
    EXPECT_EQ(to_hex(compute_digest(to_bytes("abc"))), oracle::frozen::kSha256Abc);
}

TEST(ComputeDigest, SixMegabytesDeterministic) {
    std::mt19937_64 rng(6);
    Bytes blob(6 * 1000 * 1000);
    for (auto& b : blob) b = static_cast<std::uint8_t>(rng());
    const auto first = compute_digest(blob);
    EXPECT_EQ(first, compute_digest(blob));
    EXPECT_EQ(first, oracle::sha256(blob));
}

TEST(ImageStore, LoadsFixtureWithKnownDigest) {
    ImageStore store(kFixtureDir / "images");
    auto image = store.load("wget");
    ASSERT_TRUE(image);
    EXPECT_EQ(image->blob.size(), 65536u);
    EXPECT_EQ(to_hex(image->digest), oracle::frozen::kFixtureWgetDigest);
    EXPECT_EQ(store.names(), std::vector<std::string>{"wget"});
}

TEST(ImageStore, RejectsMissingAndEscapingNames) {
    ImageStore store(kFixtureDir / "images");
    EXPECT_FALSE(store.load("curl"));
    EXPECT_FALSE(store.load("../aa_store.conf"));
    EXPECT_FALSE(store.load(".."));
    EXPECT_FALSE(store.load(""));
}

TEST(AddressAllocator, LowestFreeFirst) {
    AddressAllocator a(net::Ipv6Prefix::parse("2001:db8::11:0/116"), net::Ipv6Address::parse("2001:db8::11:fff"));
    EXPECT_EQ(a.allocate()->to_string(), "2001:db8::11:1");
    EXPECT_EQ(a.allocate()->to_string(), "2001:db8::11:2");
    a.release(net::Ipv6Address::parse("2001:db8::11:1"));
    EXPECT_EQ(a.allocate()->to_string(), "2001:db8::11:1");
    EXPECT_EQ(a.allocate()->to_string(), "2001:db8::11:3");
}

TEST(AddressAllocator, ExhaustsWithoutReissuing) {
    const auto subnet = net::Ipv6Prefix::parse("2001:db8::11:0/116");
    const auto host = net::Ipv6Address::parse("2001:db8::11:fff");
    AddressAllocator a(subnet, host);
    std::set<net::Ipv6Address> seen;
    while (auto addr = a.allocate()) {
        EXPECT_TRUE(subnet.contains(*addr));
        EXPECT_NE(*addr, host);
        EXPECT_NE(*addr, subnet.network());
        EXPECT_TRUE(seen.insert(*addr).second);
    }
    EXPECT_EQ(seen.size(), 4094u);
}

// --- CsSession ---------------------------------------------------------------

struct Clocked {
    Clock::time_point now = Clock::now();
    CsSession::Options options() {
        return {3, std::chrono::seconds(2), [this] { return now; }};
    }
};

eap::Frame identity_req(std::uint8_t id = 7) { return eap::Frame::carrying(eap::Packet::request(id, eap::type::kIdentity)); }
eap::Frame md5_req(std::uint8_t id = 8, Bytes challenge = Bytes(16, 0x42)) {
    return eap::Frame::carrying(eap::Packet::request(id, eap::type::kMd5Challenge, eap::encode_md5_challenge(challenge)));
}
eap::Frame success(std::uint8_t id = 8) { return eap::Frame::carrying(eap::Packet::success(id)); }
eap::Frame failure(std::uint8_t id = 8) { return eap::Frame::carrying(eap::Packet::failure(id)); }
eap::Frame cazd_for(const char* rac) {
    radius::CazdAttributes c;
    c.rac_address = net::Ipv6Address::parse(rac);
    c.allowed_peers = {net::Ipv6Prefix::parse("2001:db8::aa:0")};
    return eap::Frame::cazd_notify(radius::encode_attributes(radius::encode_cazd(c)));
}

TEST(CsSession, ScriptedTranscriptAuthorizes) {
    Clocked c;
    CsSession s(testing_support::identity("alice"), to_bytes("wonderland"), c.options());
    auto out = s.begin();
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].type, eap::FrameType::Start);

    out = s.on_frame(identity_req());
    ASSERT_EQ(out.size(), 1u);
    auto resp = eap::decode_packet(out[0].body);
    EXPECT_EQ(resp.identifier, 7);
    EXPECT_EQ(eap::parse_container_identity(xrac::to_string(resp.type_data)), testing_support::identity("alice"));
    EXPECT_EQ(s.state(), CsSession::State::IdentitySent);

    out = s.on_frame(md5_req());
    resp = eap::decode_packet(out[0].body);
    const auto expected = eap::md5_challenge_response(8, to_bytes("wonderland"), Bytes(16, 0x42));
    EXPECT_EQ(eap::decode_md5_challenge(resp.type_data).value, Bytes(expected.begin(), expected.end()));
    EXPECT_EQ(s.state(), CsSession::State::ChallengeAnswered);

    EXPECT_TRUE(s.on_frame(success()).empty());
    EXPECT_EQ(s.state(), CsSession::State::ChallengeAnswered);
    s.on_frame(cazd_for("2001:db8::11:1"));
    EXPECT_EQ(s.state(), CsSession::State::Authorized);
    ASSERT_TRUE(s.cazd());
    EXPECT_EQ(s.cazd()->allowed_peers.size(), 1u);
}

TEST(CsSession, PasswordNeverOnTheWire) {
    Clocked c;
    CsSession s(testing_support::identity("alice"), to_bytes("wonderland"), c.options());
    std::vector<eap::Frame> all = s.begin();
    for (const auto& f : {identity_req(), md5_req()})
        for (auto& out : s.on_frame(f)) all.push_back(out);
    for (const auto& f : all) {
        const auto wire = eap::encode_frame(f);
        const std::string text(wire.begin(), wire.end());
        EXPECT_EQ(text.find("wonderland"), std::string::npos);
    }
}

TEST(CsSession, FailureAfterIdentity) {
    Clocked c;
    CsSession s(testing_support::identity("alice"), to_bytes("x"), c.options());
    s.begin();
    s.on_frame(identity_req());
    s.on_frame(failure(7));
    EXPECT_EQ(s.state(), CsSession::State::Failed);
    EXPECT_TRUE(s.ca_answered());
}

TEST(CsSession, SuccessWithoutCazdFailsAfterTimeout) {
    Clocked c;
    CsSession s(testing_support::identity("alice"), to_bytes("x"), c.options());
    s.begin();
    s.on_frame(identity_req());
    s.on_frame(md5_req());
    s.on_frame(success());
    c.now += std::chrono::milliseconds(1999);
    EXPECT_TRUE(s.tick().empty());
    EXPECT_EQ(s.state(), CsSession::State::ChallengeAnswered);
    c.now += std::chrono::milliseconds(1);
    EXPECT_TRUE(s.tick().empty());
    EXPECT_EQ(s.state(), CsSession::State::Failed);
}

TEST(CsSession, CazdForAnotherAddressFailsClosed) {
    Clocked c;
    CsSession s(testing_support::identity("alice"), to_bytes("x"), c.options());
    s.begin();
    s.on_frame(identity_req());
    s.on_frame(md5_req());
    s.on_frame(success());
    s.on_frame(cazd_for("2001:db8::11:9"));
    EXPECT_EQ(s.state(), CsSession::State::Failed);
}

TEST(CsSession, SilentAuthenticatorTimesOutAfterBudget) {
    Clocked c;
    CsSession s(testing_support::identity("alice"), to_bytes("x"), c.options());
    int starts = static_cast<int>(s.begin().size());
    for (int i = 0; i < 5; ++i) {
        c.now += std::chrono::seconds(2);
        for (const auto& f : s.tick()) starts += f.type == eap::FrameType::Start;
    }
    EXPECT_EQ(starts, 3);
    EXPECT_EQ(s.state(), CsSession::State::Failed);
    EXPECT_FALSE(s.ca_answered());
}

TEST(CsSession, RepeatedRequestGetsSameAnswer) {
    Clocked c;
    CsSession s(testing_support::identity("alice"), to_bytes("x"), c.options());
    s.begin();
    auto a = s.on_frame(identity_req());
    auto b = s.on_frame(identity_req());
    EXPECT_EQ(a, b);
}

TEST(CsSession, UnknownMethodGetsNak) {
    Clocked c;
    CsSession s(testing_support::identity("alice"), to_bytes("x"), c.options());
    s.begin();
    s.on_frame(identity_req());
    auto out = s.on_frame(eap::Frame::carrying(eap::Packet::request(9, 13, {})));
    ASSERT_EQ(out.size(), 1u);
    auto nak = eap::decode_packet(out[0].body);
    EXPECT_EQ(nak.type, eap::type::kNak);
    EXPECT_EQ(nak.type_data, Bytes{eap::type::kMd5Challenge});
}

// Every event sequence up to length 6: Authorized requires an answered
// challenge, then Success and matching CAZD; terminal states stay put.
TEST(CsSession, ModelCheckSmallScope) {
    const std::vector<std::function<eap::Frame()>> frames = {
        [] { return identity_req(); }, [] { return md5_req(); },  [] { return success(); },
        [] { return failure(); },      [] { return cazd_for("2001:db8::11:1"); },
        [] { return cazd_for("2001:db8::11:2"); },
    };
    const int kTick = static_cast<int>(frames.size());
    const int alphabet = kTick + 1;
    std::size_t explored = 0, authorized = 0;
    std::vector<int> seq;
    std::function<void(int)> explore = [&](int depth) {
        Clocked c;
        CsSession s(testing_support::identity("alice"), to_bytes("x"), c.options());
        s.begin();
        bool answered = false, success_after_answer = false, good_cazd = false;
        std::optional<CsSession::State> terminal;
        for (int e : seq) {
            if (e == kTick) {
                c.now += std::chrono::seconds(2);
                s.tick();
            } else {
                const bool was_answered = s.state() == CsSession::State::ChallengeAnswered;
                s.on_frame(frames[static_cast<std::size_t>(e)]());
                if (e == 1 && !terminal) answered = answered || s.state() == CsSession::State::ChallengeAnswered;
                if (e == 2 && was_answered) success_after_answer = true;
                if (e == 4 && was_answered) good_cazd = true;
            }
            if (terminal) ASSERT_EQ(s.state(), *terminal);
            if (s.finished() && !terminal) terminal = s.state();
        }
        ++explored;
        if (s.state() == CsSession::State::Authorized) {
            ++authorized;
            ASSERT_TRUE(answered && success_after_answer && good_cazd);
        }
        if (depth == 0) return;
        for (int e = 0; e < alphabet; ++e) {
            seq.push_back(e);
            explore(depth - 1);
            seq.pop_back();
        }
    };
    explore(6);
    EXPECT_GT(explored, 100000u);
    EXPECT_GT(authorized, 0u);
}

// --- against the live stack ----------------------------------------------------

TEST(CsClient, AuthorizesAgainstLiveStack) {
    LiveStack stack;
    CsClient client(stack.ca->frontend_endpoint());
    auto outcome = client.authenticate(testing_support::identity("alice"), to_bytes("wonderland"));
    ASSERT_TRUE(outcome.authorized);
    EXPECT_EQ(outcome.cazd->allowed_peers, std::vector<net::Ipv6Prefix>{net::Ipv6Prefix::parse("2001:db8::aa:0")});
    EXPECT_EQ(stack.dynamic_pairs(), 1u);
    client.logoff();
    for (int i = 0; i < 100 && stack.dynamic_pairs() != 0; ++i)
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    EXPECT_EQ(stack.dynamic_pairs(), 0u);
}

TEST(CsClient, WrongPasswordIsAaFailed) {
    LiveStack stack;
    CsClient client(stack.ca->frontend_endpoint());
    auto outcome = client.authenticate(testing_support::identity("alice"), to_bytes("nope"));
    EXPECT_FALSE(outcome.authorized);
    EXPECT_EQ(outcome.deny_reason, "aa-failed");
    EXPECT_EQ(stack.dynamic_pairs(), 0u);
}

TEST(CsClient, TwoInterleavedSupplicants) {
    LiveStack stack;
    CsClient a(stack.ca->frontend_endpoint()), b(stack.ca->frontend_endpoint());
    auto id_b = testing_support::identity("alice");
    id_b.rac_address = net::Ipv6Address::parse("2001:db8::11:2");
    CsOutcome ra, rb;
    std::thread t([&] { rb = b.authenticate(id_b, to_bytes("wonderland")); });
    ra = a.authenticate(testing_support::identity("alice"), to_bytes("wonderland"));
    t.join();
    EXPECT_TRUE(ra.authorized);
    EXPECT_TRUE(rb.authorized);
    EXPECT_EQ(stack.dynamic_pairs(), 2u);
}

TEST(CsClient, AuthenticatorRestartMidConversation) {
    LiveStack stack;
    const auto frontend = stack.ca->frontend_endpoint();
    // a CA that swallows the Start and dies
    stack.ca.reset();
    CsOutcome first;
    {
        auto mute = net::UdpSocket::bind(frontend);
        CsClient client(frontend);
        CsSession::Options quick{3, std::chrono::milliseconds(100)};
        first = client.authenticate(testing_support::identity("alice"), to_bytes("wonderland"), quick);
    }
    EXPECT_FALSE(first.authorized);
    EXPECT_EQ(first.deny_reason, "timeout");
    xrac::ca::CaService::Options o;
    o.frontend = frontend;
    o.auth_server = stack.as->endpoint();
    o.secret = "testing123";
    o.enforcer_control = stack.enforcer.control_endpoint();
    stack.ca = std::make_unique<xrac::ca::CaService>(o);
    CsClient retry(frontend);
    EXPECT_TRUE(retry.authenticate(testing_support::identity("alice"), to_bytes("wonderland")).authorized);
}

TEST(CsClient, SecretMismatchIsAaFailed) {
    LiveStack stack("ca-secret", "as-secret");
    CsClient client(stack.ca->frontend_endpoint());
    auto outcome = client.authenticate(testing_support::identity("alice"), to_bytes("wonderland"));
    EXPECT_FALSE(outcome.authorized);
    EXPECT_EQ(outcome.deny_reason, "aa-failed");
    EXPECT_EQ(stack.dynamic_pairs(), 0u);
}

}  // namespace
}  // namespace xrac::host
