#include <doctest.h>

#include <map>
#include <random>
#include <set>

#include "zsdn/apps/learning_switch.hpp"
#include "zsdn/bus/session.hpp"
#include "zsdn/frame.hpp"
#include "zsdn/harness/cluster.hpp"

using namespace zsdn;
using namespace zsdn::apps;
using namespace std::chrono_literals;

namespace {

const MacAddr A = mac_from_string("aa:00:00:00:00:01");
const MacAddr B = mac_from_string("aa:00:00:00:00:02");
const MacTable::Clock::time_point t0{};

of::PacketIn pin(std::uint32_t xid, std::uint16_t in_port, const MacAddr& src, const MacAddr& dst) {
    of::PacketIn p;
    p.xid = xid;
    p.in_port = in_port;
    p.frame = of::build_udp_frame(src, dst);
    p.total_len = static_cast<std::uint16_t>(p.frame.size());
    return p;
}

of::Message flood(const of::PacketIn& p) {
    return of::PacketOut{p.xid, of::kNoBuffer, p.in_port, {of::OutputAction{of::port::kFlood, 0}}, p.frame};
}

std::vector<of::Message> forward(const of::PacketIn& p, const MacAddr& dst, std::uint16_t out) {
    of::FlowMod fm;
    fm.xid = p.xid;
    fm.match.wildcards = 0x003FFFF7;
    fm.match.dl_dst = dst;
    fm.idle_timeout = 60;
    fm.priority = 100;
    fm.actions = {of::OutputAction{out, 0}};
    return {fm, of::PacketOut{p.xid, of::kNoBuffer, p.in_port, {of::OutputAction{out, 0}}, p.frame}};
}

/// Independent model: last-seen port per (dpid, src), flood on unknown or
/// group destinations, drop when the destination sits behind the ingress.
struct ReferenceLearner {
    std::map<std::pair<std::uint64_t, MacAddr>, std::uint16_t> table;

    std::vector<of::Message> step(std::uint64_t dpid, const of::PacketIn& p) {
        const MacAddr dst{p.frame[0], p.frame[1], p.frame[2], p.frame[3], p.frame[4], p.frame[5]};
        const MacAddr src{p.frame[6], p.frame[7], p.frame[8], p.frame[9], p.frame[10], p.frame[11]};
        if (!(src[0] & 1)) table[{dpid, src}] = p.in_port;
        auto it = (dst[0] & 1) ? table.end() : table.find({dpid, dst});
        if (it == table.end()) return {flood(p)};
        if (it->second == p.in_port) return {of::PacketOut{p.xid, of::kNoBuffer, p.in_port, {}, p.frame}};
        return forward(p, dst, it->second);
    }
};

MacAddr random_mac(std::mt19937_64& rng, int pool) {
    MacAddr m{0xaa, 0, 0, 0, 0, static_cast<std::uint8_t>(rng() % pool)};
    if (rng() % 10 == 0) m[0] = 0x01;
    return m;
}

}  // namespace

TEST_SUITE("learning_switch") {
    TEST_CASE("two-step reference") {
        MacTable table;
        const auto p1 = pin(1, 1, A, B);
        CHECK(learning_step(table, 7, p1, t0) == std::vector<of::Message>{flood(p1)});
        CHECK(table.lookup(7, A, t0) == std::optional<std::uint16_t>(1));
        CHECK(table.size() == 1);

        const auto p2 = pin(2, 2, B, A);
        CHECK(learning_step(table, 7, p2, t0) == forward(p2, A, 1));
        CHECK(table.lookup(7, B, t0) == std::optional<std::uint16_t>(2));

        const auto p3 = pin(3, 1, A, B);
        CHECK(learning_step(table, 7, p3, t0) == forward(p3, B, 2));
        CHECK(table.size() == 2);
    }

    TEST_CASE("tables are per switch") {
        MacTable table;
        learning_step(table, 1, pin(1, 1, A, B), t0);
        const auto p = pin(2, 3, B, A);
        CHECK(learning_step(table, 2, p, t0) == std::vector<of::Message>{flood(p)});
    }

    TEST_CASE("broadcast and multicast destinations flood; group sources are not learned") {
        MacTable table;
        learning_step(table, 1, pin(1, 1, A, B), t0);
        const auto bcast = pin(2, 2, B, mac_from_string("ff:ff:ff:ff:ff:ff"));
        CHECK(learning_step(table, 1, bcast, t0) == std::vector<of::Message>{flood(bcast)});
        learning_step(table, 1, pin(3, 4, mac_from_string("01:00:5e:00:00:01"), A), t0);
        CHECK(table.size() == 2);
    }

    TEST_CASE("destination behind the ingress port is dropped") {
        MacTable table;
        learning_step(table, 1, pin(1, 1, A, B), t0);
        learning_step(table, 1, pin(2, 1, B, A), t0);
        const auto p = pin(3, 1, A, B);
        const auto out = learning_step(table, 1, p, t0);
        REQUIRE(out.size() == 1);
        CHECK(std::get<of::PacketOut>(out[0]).actions.empty());
    }

    TEST_CASE("buffered packet ins are released by buffer id") {
        MacTable table;
        auto p = pin(1, 1, A, B);
        p.buffer_id = 77;
        const auto out = learning_step(table, 1, p, t0);
        const auto& po = std::get<of::PacketOut>(out.at(0));
        CHECK(po.buffer_id == 77);
        CHECK(po.frame.empty());
    }

    TEST_CASE("entries age out") {
        MacTable table;
        table.learn(1, A, 1, t0);
        CHECK(table.lookup(1, A, t0 + 299s).has_value());
        CHECK_FALSE(table.lookup(1, A, t0 + 301s).has_value());
        table.expire(t0 + 301s);
        CHECK(table.size() == 0);
        table.learn(1, A, 1, t0);
        table.learn(1, A, 2, t0 + 200s);
        CHECK(table.lookup(1, A, t0 + 400s) == std::optional<std::uint16_t>(2));
    }

    TEST_CASE("agrees with the reference model on random traffic") {
        std::mt19937_64 rng(61);
        for (int round = 0; round < 200; ++round) {
            MacTable table;
            ReferenceLearner ref;
            std::set<std::pair<std::uint64_t, MacAddr>> seen;
            for (std::uint32_t i = 0; i < 200; ++i) {
                const std::uint64_t dpid = 1 + rng() % 3;
                const auto src = random_mac(rng, 8);
                const auto p = pin(i, static_cast<std::uint16_t>(1 + rng() % 4), src, random_mac(rng, 8));
                if (!(src[0] & 1)) seen.insert({dpid, src});
                const auto got = learning_step(table, dpid, p, t0);
                CHECK(got == ref.step(dpid, p));
                for (const auto& m : got) {
                    if (const auto* fm = std::get_if<of::FlowMod>(&m)) {
                        CHECK(std::get<of::OutputAction>(fm->actions[0]).port != p.in_port);
                    }
                }
                CHECK(table.size() <= seen.size());
            }
        }
    }

    TEST_CASE("replay is deterministic") {
        std::mt19937_64 rng(62);
        std::vector<std::pair<std::uint64_t, of::PacketIn>> trace;
        for (std::uint32_t i = 0; i < 2000; ++i) {
            trace.emplace_back(1 + rng() % 4, pin(i, static_cast<std::uint16_t>(1 + rng() % 4), random_mac(rng, 16),
                                                  random_mac(rng, 16)));
        }
        const auto run = [&] {
            MacTable table;
            std::vector<of::Message> all;
            for (const auto& [d, p] : trace) {
                auto out = learning_step(table, d, p, t0);
                all.insert(all.end(), out.begin(), out.end());
            }
            return std::make_pair(table, all);
        };
        const auto first = run();
        const auto second = run();
        CHECK(first.first == second.first);
        CHECK(first.second == second.second);
    }

    TEST_CASE("subscription patterns") {
        CHECK(packet_in_pattern(2) == topic::SubscriptionPattern::literal(from_hex("02 00 00 00 0A 02")));
        const auto wild = packet_in_pattern(std::nullopt);
        CHECK(wild == topic::pattern_from_text("02.0000.00.0A.??"));
        for (int g = 0; g < 256; ++g) {
            const auto t = topic::encode_packet_in_topic(static_cast<std::uint8_t>(g), 0x0806, std::nullopt);
            CHECK(topic::matches(wild, t));
            CHECK(topic::matches(packet_in_pattern(static_cast<std::uint8_t>(g)), t));
            CHECK_FALSE(topic::matches(packet_in_pattern(static_cast<std::uint8_t>(g + 1)), t));
        }
        const auto cfg = LearningSwitch::config({}, 1);
        CHECK(cfg.controllet_type == kLearningSwitchType);
        CHECK(cfg.to_patterns == std::vector<topic::SubscriptionPattern>{packet_in_pattern(1)});
    }

    TEST_CASE("controllet publishes responses on the switch topic") {
        harness::Cluster cluster(3);
        auto& ls = cluster.start_learning_switch(std::nullopt);
        REQUIRE(cluster.wait_active(3s));
        auto probe = bus::Session::connect(cluster.bus());
        bus::RegisterBody b;
        b.controllet_type = 0x00FE;
        b.instance_id = 0xFE;
        b.to_patterns.push_back(topic::pattern_from_text("01.0000.0000000000000009"));
        REQUIRE(probe.register_controllet(b) == bus::status::kOk);

        const auto p = pin(5, 1, A, B);
        Bytes payload;
        put_u64(payload, 9);
        const Bytes raw = of::encode(p);
        payload.insert(payload.end(), raw.begin(), raw.end());
        probe.publish(topic::encode_packet_in_topic(3, 0x0800, 0x11), payload);
        Bytes lldp_payload;
        put_u64(lldp_payload, 9);
        of::PacketIn lldp = p;
        lldp.frame = of::build_lldp(1, 1);
        const Bytes lraw = of::encode(lldp);
        lldp_payload.insert(lldp_payload.end(), lraw.begin(), lraw.end());
        probe.publish(topic::encode_packet_in_topic(3, 0x88CC, std::nullopt), lldp_payload);
        probe.flush();

        auto in = probe.next_event(3000ms);
        REQUIRE(in.has_value());
        const auto& ev = std::get<bus::Event>(*in);
        CHECK(ev.topic == topic::encode_to_switch_topic(9, 0x0D));
        CHECK(of::decode(ev.payload) == flood(p));
        CHECK_FALSE(probe.next_event(300ms).has_value());
        CHECK(ls.app().packet_ins() == 1);
    }
}
