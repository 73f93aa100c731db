#include <doctest.h>

#include "oracles.hpp"
#include "zsdn/frame.hpp"
#include "zsdn/harness/flow_table.hpp"
#include "zsdn/ofcodec.hpp"

using namespace zsdn;
using namespace zsdn::harness;
using namespace std::chrono_literals;

namespace {

const MacAddr A = mac_from_string("aa:00:00:00:00:01");
const MacAddr B = mac_from_string("aa:00:00:00:00:02");
const Clock::time_point t0{};

of::FlowMod dl_dst_flow(const MacAddr& dst, std::uint16_t out, std::uint16_t priority = 100) {
    of::FlowMod fm;
    fm.match.wildcards = of::wildcard::kAll & ~of::wildcard::kDlDst;
    fm.match.dl_dst = dst;
    fm.priority = priority;
    fm.actions = {of::OutputAction{out, 0}};
    return fm;
}

Bytes corpus_frame(const std::string& name) {
    static const auto c = testing::load_corpus(std::string(ZSDN_TEST_DATA) + "/of10_corpus.txt");
    return std::get<of::PacketIn>(of::decode(testing::corpus_entry(c, name).bytes)).frame;
}

}  // namespace

TEST_SUITE("flow_table") {
    TEST_CASE("field extraction from reference frames") {
        const auto tcp = extract_fields(2, corpus_frame("packet_in_tcp"));
        REQUIRE(tcp.has_value());
        CHECK(tcp->in_port == 2);
        CHECK(tcp->dl_src == A);
        CHECK(tcp->dl_dst == B);
        CHECK(tcp->dl_type == 0x0800);
        CHECK(tcp->nw_proto == 6);
        CHECK(tcp->nw_src == 0x0A000001);
        CHECK(tcp->nw_dst == 0x0A000002);
        CHECK(tcp->tp_src == 1234);
        CHECK(tcp->tp_dst == 80);
        CHECK(tcp->dl_vlan == 0xFFFF);

        const auto udp = extract_fields(3, corpus_frame("packet_in_udp_buffered"));
        CHECK(udp->tp_src == 53);
        CHECK(udp->tp_dst == 5353);

        const auto arp = extract_fields(1, corpus_frame("packet_in_arp"));
        CHECK(arp->dl_type == 0x0806);
        CHECK(arp->nw_proto == 1);
        CHECK(arp->nw_src == 0x0A000001);
        CHECK(arp->nw_dst == 0x0A000002);
        CHECK_FALSE(extract_fields(1, Bytes(10, 0)).has_value());
    }

    TEST_CASE("vlan tagged frames") {
        Bytes f = corpus_frame("packet_in_tcp");
        const Bytes tag = from_hex("8100 A00A");
        f.insert(f.begin() + 12, tag.begin(), tag.end());
        const auto fields = extract_fields(1, f);
        CHECK(fields->dl_vlan == 10);
        CHECK(fields->dl_vlan_pcp == 5);
        CHECK(fields->dl_type == 0x0800);
        CHECK(fields->tp_dst == 80);
    }

    TEST_CASE("match semantics") {
        const auto f = *extract_fields(2, corpus_frame("packet_in_tcp"));
        of::Match all;
        CHECK(match_packet(all, f));
        of::Match m;
        m.wildcards = of::wildcard::kAll & ~of::wildcard::kDlDst;
        m.dl_dst = B;
        CHECK(match_packet(m, f));
        m.dl_dst = A;
        CHECK_FALSE(match_packet(m, f));

        of::Match prefix;
        prefix.wildcards = (of::wildcard::kAll & ~of::wildcard::kNwSrcMask) | (8u << of::wildcard::kNwSrcShift);
        prefix.nw_src = 0x0A0000FF;
        CHECK(match_packet(prefix, f));
        prefix.wildcards = (of::wildcard::kAll & ~of::wildcard::kNwSrcMask);
        CHECK_FALSE(match_packet(prefix, f));
    }

    TEST_CASE("coverage relation") {
        of::Match wide;
        const of::Match narrow = dl_dst_flow(A, 1).match;
        CHECK(match_covers(wide, narrow));
        CHECK_FALSE(match_covers(narrow, wide));
        CHECK(match_covers(narrow, narrow));
        CHECK_FALSE(match_covers(narrow, dl_dst_flow(B, 1).match));
    }

    TEST_CASE("priority order with insertion order breaking ties") {
        FlowTable t;
        auto low = dl_dst_flow(B, 1, 10);
        auto high = dl_dst_flow(B, 2, 200);
        of::FlowMod any;
        any.priority = 200;
        any.actions = {of::OutputAction{3, 0}};
        CHECK(t.apply(low, t0) == FlowModResult::Applied);
        CHECK(t.apply(high, t0) == FlowModResult::Applied);
        CHECK(t.apply(any, t0) == FlowModResult::Applied);
        const auto f = *extract_fields(1, of::build_udp_frame(A, B));
        const auto* e = t.lookup(f, t0);
        REQUIRE(e != nullptr);
        CHECK(std::get<of::OutputAction>(e->actions[0]).port == 2);
        CHECK(t.entries()[0].priority == 200);
        CHECK(t.entries()[2].priority == 10);
    }

    TEST_CASE("add replaces an identical match and priority in place") {
        FlowTable t;
        t.apply(dl_dst_flow(A, 1), t0);
        t.apply(dl_dst_flow(B, 2), t0);
        t.apply(dl_dst_flow(A, 3), t0);
        REQUIRE(t.size() == 2);
        CHECK(t.entries()[0].match.dl_dst == A);
        CHECK(std::get<of::OutputAction>(t.entries()[0].actions[0]).port == 3);
    }

    TEST_CASE("modify and delete") {
        FlowTable t;
        t.apply(dl_dst_flow(A, 1), t0);
        t.apply(dl_dst_flow(B, 2), t0);
        auto mod = dl_dst_flow(A, 4);
        mod.command = of::flow_command::kModifyStrict;
        t.apply(mod, t0);
        CHECK(std::get<of::OutputAction>(t.entries()[0].actions[0]).port == 4);

        of::FlowMod del_by_port;
        del_by_port.command = of::flow_command::kDelete;
        del_by_port.out_port = 2;
        t.apply(del_by_port, t0);
        REQUIRE(t.size() == 1);
        CHECK(t.entries()[0].match.dl_dst == A);

        auto strict = dl_dst_flow(A, 4, 99);
        strict.command = of::flow_command::kDeleteStrict;
        t.apply(strict, t0);
        CHECK(t.size() == 1);
        strict.priority = 100;
        t.apply(strict, t0);
        CHECK(t.size() == 0);

        t.apply(dl_dst_flow(A, 1), t0);
        of::FlowMod wipe;
        wipe.command = of::flow_command::kDelete;
        t.apply(wipe, t0);
        CHECK(t.size() == 0);

        auto add_via_modify = dl_dst_flow(B, 5);
        add_via_modify.command = of::flow_command::kModify;
        t.apply(add_via_modify, t0);
        CHECK(t.size() == 1);
    }

    TEST_CASE("unsupported requests leave the table untouched") {
        FlowTable t;
        auto fm = dl_dst_flow(A, 1);
        fm.actions.emplace_back(of::RawAction{1, from_hex("000a0000")});
        CHECK(t.apply(fm, t0) == FlowModResult::UnsupportedAction);
        fm = dl_dst_flow(A, 1);
        fm.command = 9;
        CHECK(t.apply(fm, t0) == FlowModResult::UnsupportedCommand);
        CHECK(t.size() == 0);
    }

    TEST_CASE("idle and hard timeouts") {
        FlowTable t;
        auto idle = dl_dst_flow(A, 1);
        idle.idle_timeout = 60;
        auto hard = dl_dst_flow(B, 2);
        hard.hard_timeout = 30;
        t.apply(idle, t0);
        t.apply(hard, t0);
        const auto fa = *extract_fields(1, of::build_udp_frame(B, A));
        CHECK(t.lookup(fa, t0 + 50s) != nullptr);
        t.expire(t0 + 100s);
        REQUIRE(t.size() == 1);
        t.expire(t0 + 111s);
        CHECK(t.size() == 0);
    }
}
