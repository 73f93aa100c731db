#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "zsdn/frame.hpp"
#include "zsdn/ofcodec.hpp"

using namespace zsdn;
using namespace zsdn::of;

namespace {

Bytes corpus_frame(const std::string& name) {
    static const auto c = testing::load_corpus(std::string(ZSDN_TEST_DATA) + "/of10_corpus.txt");
    return std::get<PacketIn>(decode(testing::corpus_entry(c, name).bytes)).frame;
}

}  // namespace

TEST_SUITE("frame") {
    TEST_CASE("classification of reference frames") {
        const auto arp = classify_frame(corpus_frame("packet_in_arp"));
        CHECK(arp.ethertype == kEthertypeArp);
        CHECK(arp.eth_src == mac_from_string("aa:00:00:00:00:01"));
        CHECK(arp.eth_dst == mac_from_string("ff:ff:ff:ff:ff:ff"));
        CHECK_FALSE(arp.ip_proto.has_value());

        const auto tcp = classify_frame(corpus_frame("packet_in_tcp"));
        CHECK(tcp.ethertype == kEthertypeIpv4);
        CHECK(tcp.ip_proto == std::optional<std::uint8_t>(6));
        CHECK(classify_frame(corpus_frame("packet_in_udp_buffered")).ip_proto == std::optional<std::uint8_t>(17));
        CHECK(classify_frame(corpus_frame("packet_in_lldp")).ethertype == kEthertypeLldp);
    }

    TEST_CASE("short and truncated frames") {
        CHECK_THROWS_AS(classify_frame(Bytes(13, 0)), ClassifyError);
        Bytes v4 = from_hex("aa0000000002 aa0000000001 0800 45");
        CHECK_FALSE(classify_frame(v4).ip_proto.has_value());
        Bytes bad_ihl = corpus_frame("packet_in_tcp");
        bad_ihl[14] = 0x42;
        CHECK_FALSE(classify_frame(bad_ihl).ip_proto.has_value());
    }

    TEST_CASE("lldp probe matches the reference layout") {
        CHECK(build_lldp(1, 7) == corpus_frame("packet_in_lldp"));
        CHECK(decode_lldp(corpus_frame("packet_in_lldp")) == LldpOrigin{1, 7});
    }

    TEST_CASE("lldp round trip") {
        std::mt19937_64 rng(3);
        for (int i = 0; i < 1000; ++i) {
            const LldpOrigin o{rng(), static_cast<std::uint16_t>(rng())};
            const Bytes f = build_lldp(o.dpid, o.port);
            CHECK(classify_frame(f).ethertype == kEthertypeLldp);
            CHECK(classify_frame(f).eth_dst == kLldpMulticast);
            CHECK(decode_lldp(f) == o);
        }
    }

    TEST_CASE("foreign lldp is rejected") {
        CHECK_THROWS_AS(decode_lldp(corpus_frame("packet_in_arp")), std::invalid_argument);
        Bytes f = build_lldp(9, 2);
        f[15] = 0x04;  // chassis id subtype MAC instead of locally assigned
        CHECK_THROWS_AS(decode_lldp(f), NotOurLldp);
        Bytes truncated = build_lldp(9, 2);
        truncated.resize(20);
        CHECK_THROWS(decode_lldp(truncated));
    }

    TEST_CASE("helper frames") {
        const MacAddr a = mac_from_string("aa:00:00:00:00:01");
        const MacAddr b = mac_from_string("aa:00:00:00:00:02");
        const auto udp = classify_frame(build_udp_frame(a, b));
        CHECK(udp.eth_src == a);
        CHECK(udp.eth_dst == b);
        CHECK(udp.ip_proto == std::optional<std::uint8_t>(17));
        CHECK(classify_frame(build_arp_frame(a, b)).ethertype == kEthertypeArp);
        CHECK(is_multicast(kLldpMulticast));
        CHECK_FALSE(is_multicast(a));
    }
}
