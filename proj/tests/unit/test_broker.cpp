#include <doctest.h>

#include <atomic>
#include <thread>

#include "zsdn/bus/broker.hpp"
#include "zsdn/bus/session.hpp"
#include "zsdn/harness/cluster.hpp"

using namespace zsdn;
using namespace zsdn::bus;
using namespace std::chrono_literals;

namespace {

BrokerOptions ephemeral() {
    BrokerOptions o;
    o.listen = {"127.0.0.1", 0};
    return o;
}

Session registered(const net::Endpoint& ep, std::uint64_t id, std::vector<topic::SubscriptionPattern> to = {},
                   SessionOptions opts = {}) {
    Session s = Session::connect(ep, opts);
    RegisterBody b;
    b.controllet_type = 0x00F0;
    b.instance_id = id;
    b.to_patterns = std::move(to);
    REQUIRE(s.register_controllet(b) == status::kOk);
    return s;
}

std::optional<Event> next_event(Session& s, std::chrono::milliseconds timeout = 2000ms) {
    auto in = s.next_event(timeout);
    if (!in || !std::holds_alternative<Event>(*in)) return std::nullopt;
    return std::get<Event>(*in);
}

}  // namespace

TEST_SUITE("broker") {
    TEST_CASE("publish with no subscribers succeeds") {
        harness::BrokerProcess broker(ephemeral());
        Session a = registered(broker.endpoint(), 1);
        a.publish(topic::encode_port_status_topic(), from_hex("01"));
        a.flush();
        CHECK_FALSE(a.next_event(100ms).has_value());
    }

    TEST_CASE("duplicate registration over the wire") {
        harness::BrokerProcess broker(ephemeral());
        Session a = registered(broker.endpoint(), 7);
        Session b = Session::connect(broker.endpoint());
        RegisterBody d;
        d.instance_id = 7;
        CHECK(b.register_controllet(d) == status::kRejected);
    }

    TEST_CASE("events arrive in publish order") {
        harness::BrokerProcess broker(ephemeral());
        Session sub = registered(broker.endpoint(), 2, {topic::pattern_from_text("02.0000.00.0C")});
        Session pub = registered(broker.endpoint(), 1);
        for (std::uint32_t i = 0; i < 2000; ++i) {
            Bytes p;
            put_u32(p, i);
            pub.publish(topic::encode_port_status_topic(), p);
        }
        pub.flush();
        for (std::uint32_t i = 0; i < 2000; ++i) {
            auto ev = next_event(sub);
            REQUIRE(ev.has_value());
            CHECK(get_u32(ev->payload, 0) == i);
        }
        CHECK_FALSE(sub.next_event(100ms).has_value());
    }

    TEST_CASE("publisher does not receive its own publication") {
        harness::BrokerProcess broker(ephemeral());
        Session a = registered(broker.endpoint(), 1, {topic::pattern_from_text("02.0000")});
        Session b = registered(broker.endpoint(), 2, {topic::pattern_from_text("02.0000")});
        a.publish(topic::encode_port_status_topic(), {});
        a.flush();
        CHECK(next_event(b).has_value());
        CHECK_FALSE(a.next_event(200ms).has_value());
    }

    TEST_CASE("request to an echo responder") {
        harness::BrokerProcess broker(ephemeral());
        std::atomic<bool> done{false};
        std::thread responder([&, ep = broker.endpoint()] {
            Session r = registered(ep, 0xEC);
            while (!done) {
                auto in = r.next_event(50ms);
                if (in && std::holds_alternative<IncomingRequest>(*in)) {
                    const auto& req = std::get<IncomingRequest>(*in);
                    r.reply(req, status::kOk, req.payload);
                    r.flush();
                }
            }
        });
        Session c = registered(broker.endpoint(), 0xC1);
        for (int i = 0; i < 20; ++i) {
            const Bytes payload{static_cast<std::uint8_t>(i), 0xAA};
            Reply rep{status::kRejected, {}};
            for (int attempt = 0; attempt < 20; ++attempt) {
                rep = c.request(0xEC, payload, 2000ms);
                if (rep.status == status::kOk) break;
                std::this_thread::sleep_for(20ms);
            }
            CHECK(rep.status == status::kOk);
            CHECK(rep.payload == payload);
        }
        done = true;
        responder.join();
    }

    TEST_CASE("request to a silent target times out on schedule") {
        harness::BrokerProcess broker(ephemeral());
        Session silent = registered(broker.endpoint(), 0x51);
        Session c = registered(broker.endpoint(), 0xC1);
        const auto start = std::chrono::steady_clock::now();
        CHECK_THROWS_AS(c.request(0x51, {}, 100ms), RequestTimeout);
        const auto took = std::chrono::steady_clock::now() - start;
        CHECK(took >= 100ms);
        CHECK(took < 600ms);
    }

    TEST_CASE("request to an unknown id is rejected") {
        harness::BrokerProcess broker(ephemeral());
        Session c = registered(broker.endpoint(), 0xC1);
        CHECK(c.request(0xDEAD, {}, 1000ms).status == status::kNoSuchTarget);
    }

    TEST_CASE("LIST reports live members") {
        harness::BrokerProcess broker(ephemeral());
        Session a = registered(broker.endpoint(), 0x11);
        Session b = registered(broker.endpoint(), 0x22);
        const auto rep = a.request(kBrokerId, Bytes{opcode::kList}, 1000ms);
        CHECK(rep.status == status::kOk);
        CHECK(lifecycle::decode_members(rep.payload) ==
              std::vector<lifecycle::Member>{{0x00F0, 0x11}, {0x00F0, 0x22}});
    }

    TEST_CASE("join and leave events") {
        harness::BrokerProcess broker(ephemeral());
        Session watcher = registered(broker.endpoint(), 1, {lifecycle::any_pattern()});
        {
            Session b = registered(broker.endpoint(), 2);
            auto join = next_event(watcher);
            REQUIRE(join.has_value());
            CHECK(join->topic == lifecycle::topic_for(lifecycle::kJoin));
            CHECK(lifecycle::decode_member(join->payload) == lifecycle::Member{0x00F0, 2});
            b.abort();
        }
        auto leave = next_event(watcher);
        REQUIRE(leave.has_value());
        CHECK(leave->topic == lifecycle::topic_for(lifecycle::kLeave));
        CHECK(lifecycle::decode_member(leave->payload).instance_id == 2);
    }

    TEST_CASE("heartbeats keep a quiet session alive; silence gets it swept") {
        BrokerOptions o = ephemeral();
        o.dead_after = 400ms;
        o.sweep_interval = 50ms;
        harness::BrokerProcess broker(o);
        SessionOptions fast;
        fast.heartbeat_interval = 100ms;
        Session watcher = registered(broker.endpoint(), 1, {lifecycle::any_pattern()}, fast);
        Session quiet = registered(broker.endpoint(), 2, {}, fast);
        Session mute = registered(broker.endpoint(), 3, {}, SessionOptions{});
        std::optional<Event> leave;
        const auto deadline = std::chrono::steady_clock::now() + 1500ms;
        while (std::chrono::steady_clock::now() < deadline) {
            quiet.next_event(20ms);
            auto in = watcher.next_event(20ms);
            if (in && std::holds_alternative<Event>(*in) && std::get<Event>(*in).topic == lifecycle::topic_for(lifecycle::kLeave)) {
                REQUIRE_FALSE(leave.has_value());
                leave = std::get<Event>(*in);
            }
        }
        REQUIRE(leave.has_value());
        CHECK(lifecycle::decode_member(leave->payload).instance_id == 3);
        CHECK(watcher.request(kBrokerId, Bytes{opcode::kList}, 1000ms).payload ==
              lifecycle::encode_members({{0x00F0, 1}, {0x00F0, 2}}));
    }

    TEST_CASE("a busy publisher still heartbeats") {
        BrokerOptions o = ephemeral();
        o.dead_after = 400ms;
        o.sweep_interval = 50ms;
        harness::BrokerProcess broker(o);
        SessionOptions fast;
        fast.heartbeat_interval = 100ms;
        Session watcher = registered(broker.endpoint(), 1, {lifecycle::any_pattern()}, fast);
        Session busy = registered(broker.endpoint(), 2, {}, fast);
        const auto topic = topic::encode_packet_in_topic(0, 0x0800, 0x11);
        bool left = false;
        const auto deadline = std::chrono::steady_clock::now() + 1500ms;
        while (std::chrono::steady_clock::now() < deadline) {
            for (int i = 0; i < 20; ++i) busy.publish(topic, Bytes{0x01});
            busy.next_event(5ms);
            auto in = watcher.next_event(5ms);
            if (in && std::holds_alternative<Event>(*in) && std::get<Event>(*in).topic == lifecycle::topic_for(lifecycle::kLeave)) {
                left = true;
            }
        }
        CHECK_FALSE(left);
        CHECK(watcher.request(kBrokerId, Bytes{opcode::kList}, 1000ms).payload ==
              lifecycle::encode_members({{0x00F0, 1}, {0x00F0, 2}}));
    }

    TEST_CASE("broker loss surfaces as a session error") {
        auto broker = std::make_unique<harness::BrokerProcess>(ephemeral());
        Session a = registered(broker->endpoint(), 1);
        broker.reset();
        CHECK_THROWS_AS(
            {
                for (int i = 0; i < 50; ++i) a.next_event(20ms);
            },
            SessionError);
    }

    TEST_CASE("unreachable broker") {
        SessionOptions o;
        o.connect_timeout = 200ms;
        net::Fd l = net::listen_tcp({"127.0.0.1", 0});
        const auto port = net::local_port(l.get());
        l.reset();
        CHECK_THROWS_AS(Session::connect({"127.0.0.1", port}, o), SessionError);
    }

    TEST_CASE("malformed client frames close only that connection") {
        harness::BrokerProcess broker(ephemeral());
        Session good = registered(broker.endpoint(), 1, {topic::pattern_from_text("02")});
        net::Fd raw = net::connect_tcp(broker.endpoint(), 1000ms);
        net::write_all(raw.get(), from_hex("00 00 00 01 7F"));
        Bytes buf;
        CHECK(net::wait_readable(raw.get(), 2000ms));
        CHECK(net::read_some(raw.get(), buf) == 0);
        Session other = registered(broker.endpoint(), 2);
        other.publish(topic::encode_port_status_topic(), {});
        other.flush();
        CHECK(next_event(good).has_value());
    }
}
