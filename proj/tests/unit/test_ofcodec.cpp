#include <doctest.h>

#include <random>
#include <set>

#include "oracles.hpp"
#include "zsdn/ofcodec.hpp"

using namespace zsdn;
using namespace zsdn::of;

namespace {

const std::vector<testing::CorpusEntry>& corpus() {
    static const auto c = testing::load_corpus(std::string(ZSDN_TEST_DATA) + "/of10_corpus.txt");
    return c;
}

Message decode_named(const std::string& name) { return decode(testing::corpus_entry(corpus(), name).bytes); }

MacAddr mac(const char* s) { return mac_from_string(s); }

Bytes random_bytes(std::mt19937_64& rng, std::size_t n) {
    Bytes b(n);
    for (auto& x : b) x = static_cast<std::uint8_t>(rng());
    return b;
}

Match random_match(std::mt19937_64& rng) {
    Match m;
    m.wildcards = static_cast<std::uint32_t>(rng()) & wildcard::kAll;
    m.in_port = static_cast<std::uint16_t>(rng());
    for (auto& b : m.dl_src) b = static_cast<std::uint8_t>(rng());
    for (auto& b : m.dl_dst) b = static_cast<std::uint8_t>(rng());
    m.dl_vlan = static_cast<std::uint16_t>(rng());
    m.dl_vlan_pcp = static_cast<std::uint8_t>(rng());
    m.dl_type = static_cast<std::uint16_t>(rng());
    m.nw_tos = static_cast<std::uint8_t>(rng());
    m.nw_proto = static_cast<std::uint8_t>(rng());
    m.nw_src = static_cast<std::uint32_t>(rng());
    m.nw_dst = static_cast<std::uint32_t>(rng());
    m.tp_src = static_cast<std::uint16_t>(rng());
    m.tp_dst = static_cast<std::uint16_t>(rng());
    return normalized(m);
}

std::vector<Action> random_actions(std::mt19937_64& rng) {
    std::vector<Action> acts;
    const int n = static_cast<int>(rng() % 4);
    for (int i = 0; i < n; ++i) {
        if (rng() % 3 == 0) {
            acts.emplace_back(RawAction{static_cast<std::uint16_t>(1 + rng() % 11), random_bytes(rng, 4 + 8 * (rng() % 2))});
        } else {
            acts.emplace_back(OutputAction{static_cast<std::uint16_t>(rng()), static_cast<std::uint16_t>(rng())});
        }
    }
    return acts;
}

PortDesc random_port(std::mt19937_64& rng) {
    PortDesc p;
    p.port_no = static_cast<std::uint16_t>(rng());
    for (auto& b : p.hw_addr) b = static_cast<std::uint8_t>(rng());
    p.set_name("p" + std::to_string(rng() % 1000));
    p.config = static_cast<std::uint32_t>(rng());
    p.state = static_cast<std::uint32_t>(rng());
    p.curr = static_cast<std::uint32_t>(rng());
    p.advertised = static_cast<std::uint32_t>(rng());
    p.supported = static_cast<std::uint32_t>(rng());
    p.peer = static_cast<std::uint32_t>(rng());
    return p;
}

Message random_message(std::mt19937_64& rng) {
    const auto xid = static_cast<std::uint32_t>(rng());
    switch (rng() % 10) {
        case 0: return Hello{xid, random_bytes(rng, rng() % 4)};
        case 1: return EchoRequest{xid, random_bytes(rng, rng() % 40)};
        case 2: return EchoReply{xid, random_bytes(rng, rng() % 40)};
        case 3: return FeaturesRequest{xid};
        case 4: {
            FeaturesReply f;
            f.xid = xid;
            f.datapath_id = rng();
            f.n_buffers = static_cast<std::uint32_t>(rng());
            f.n_tables = static_cast<std::uint8_t>(rng());
            f.capabilities = static_cast<std::uint32_t>(rng());
            f.actions = static_cast<std::uint32_t>(rng());
            for (int i = 0, n = static_cast<int>(rng() % 5); i < n; ++i) f.ports.push_back(random_port(rng));
            return f;
        }
        case 5: {
            PacketIn p;
            p.xid = xid;
            p.buffer_id = static_cast<std::uint32_t>(rng());
            p.total_len = static_cast<std::uint16_t>(rng());
            p.in_port = static_cast<std::uint16_t>(rng());
            p.reason = static_cast<std::uint8_t>(rng() % 2);
            p.frame = random_bytes(rng, rng() % 200);
            return p;
        }
        case 6: {
            PacketOut p;
            p.xid = xid;
            p.buffer_id = static_cast<std::uint32_t>(rng());
            p.in_port = static_cast<std::uint16_t>(rng());
            p.actions = random_actions(rng);
            p.frame = random_bytes(rng, rng() % 200);
            return p;
        }
        case 7: {
            FlowMod f;
            f.xid = xid;
            f.match = random_match(rng);
            f.cookie = rng();
            f.command = static_cast<std::uint16_t>(rng() % 5);
            f.idle_timeout = static_cast<std::uint16_t>(rng());
            f.hard_timeout = static_cast<std::uint16_t>(rng());
            f.priority = static_cast<std::uint16_t>(rng());
            f.buffer_id = static_cast<std::uint32_t>(rng());
            f.out_port = static_cast<std::uint16_t>(rng());
            f.flags = static_cast<std::uint16_t>(rng());
            f.actions = random_actions(rng);
            return f;
        }
        case 8: return PortStatus{xid, static_cast<std::uint8_t>(rng() % 3), random_port(rng)};
        default: {
            Opaque o;
            o.header.type = static_cast<std::uint8_t>(18 + rng() % 4);
            o.header.xid = xid;
            o.body = random_bytes(rng, rng() % 30);
            o.header.length = static_cast<std::uint16_t>(kHeaderLength + o.body.size());
            return o;
        }
    }
}

}  // namespace

TEST_SUITE("ofcodec") {
    TEST_CASE("reference examples") {
        CHECK(decode(from_hex("01 02 00 08 00 00 00 2A")) == Message{EchoRequest{42, {}}});
        CHECK(encode(Hello{1, {}}) == from_hex("01 00 00 08 00 00 00 01"));
        CHECK(encode(EchoReply{42, {}}) == from_hex("01 03 00 08 00 00 00 2A"));
    }

    TEST_CASE("length field larger than the buffer") {
        CHECK_THROWS_AS(decode(from_hex("01 02 00 10 00 00 00 2A 00 00 00 00")), DecodeError);
    }

    TEST_CASE("header errors name the offset") {
        try {
            decode(from_hex("04 00 00 08 00 00 00 01"));
            FAIL("expected DecodeError");
        } catch (const DecodeError& e) {
            CHECK(e.offset() == 0);
        }
        CHECK_THROWS_AS(decode(from_hex("01 00 00")), DecodeError);
        CHECK_THROWS_AS(decode(from_hex("01 00 00 04 00 00 00 01")), DecodeError);
        CHECK_THROWS_AS(decode(from_hex("01 00 00 08 00 00 00 01 00")), DecodeError);
    }

    TEST_CASE("corpus round trip is byte exact") {
        REQUIRE(corpus().size() >= 20);
        for (const auto& e : corpus()) {
            CAPTURE(e.name);
            const Message m = decode(e.bytes);
            CHECK(encode(m) == e.bytes);
            CHECK(decode_header(e.bytes).length == e.bytes.size());
        }
    }

    TEST_CASE("corpus covers every supported variant") {
        std::set<std::size_t> seen;
        std::set<std::uint8_t> types;
        for (const auto& e : corpus()) {
            seen.insert(decode(e.bytes).index());
            types.insert(e.bytes[1]);
        }
        CHECK(seen.size() == std::variant_size_v<Message>);
        for (std::uint8_t t : {0x0A, 0x0C, 0x0D, 0x0E}) CHECK(types.contains(t));
    }

    TEST_CASE("decoded fields agree with the reference dissector's inputs") {
        const auto fr = std::get<FeaturesReply>(decode_named("features_reply_3_ports"));
        CHECK(fr.xid == 3);
        CHECK(fr.datapath_id == 5);
        CHECK(fr.n_buffers == 256);
        CHECK(fr.capabilities == 0xC7);
        REQUIRE(fr.ports.size() == 3);
        CHECK(fr.ports[1].port_no == 2);
        CHECK(fr.ports[1].hw_addr == mac("02:00:00:00:05:02"));
        CHECK(fr.ports[1].name_string() == "s5-eth2");
        CHECK(std::get<FeaturesReply>(decode_named("features_reply_no_ports")).datapath_id == 0xFFFFFFFFFFFFFFFF);

        const auto pin = std::get<PacketIn>(decode_named("packet_in_arp"));
        CHECK(pin.xid == 10);
        CHECK(pin.buffer_id == kNoBuffer);
        CHECK(pin.in_port == 1);
        CHECK(pin.reason == 0);
        CHECK(pin.total_len == pin.frame.size());
        const auto buffered = std::get<PacketIn>(decode_named("packet_in_udp_buffered"));
        CHECK(buffered.buffer_id == 77);
        CHECK(buffered.reason == 1);
        CHECK(std::get<PacketIn>(decode_named("packet_in_lldp")).in_port == 7);

        const auto po = std::get<PacketOut>(decode_named("packet_out_flood"));
        REQUIRE(po.actions.size() == 1);
        CHECK(std::get<OutputAction>(po.actions[0]).port == port::kFlood);
        CHECK(po.frame == pin.frame);
        CHECK(std::get<PacketOut>(decode_named("packet_out_drop")).actions.empty());
        const auto pob = std::get<PacketOut>(decode_named("packet_out_port_buffered"));
        CHECK(pob.buffer_id == 77);
        CHECK(pob.frame.empty());

        const auto fm = std::get<FlowMod>(decode_named("flow_mod_dl_dst"));
        CHECK(fm.xid == 20);
        CHECK(fm.match.wildcards == 0x003FFFF7);
        CHECK(fm.match.dl_dst == mac("aa:00:00:00:00:01"));
        CHECK(fm.idle_timeout == 60);
        CHECK(fm.priority == 100);
        CHECK(fm.command == flow_command::kAdd);
        REQUIRE(fm.actions.size() == 1);
        CHECK(std::get<OutputAction>(fm.actions[0]).port == 1);

        const auto full = std::get<FlowMod>(decode_named("flow_mod_full_match"));
        CHECK(full.match.nw_src == 0x0A000001);
        CHECK(full.match.tp_dst == 80);
        CHECK(full.cookie == 0x1122334455667788);
        CHECK(full.actions.size() == 2);
        const auto vlan = std::get<FlowMod>(decode_named("flow_mod_set_vlan"));
        REQUIRE(vlan.actions.size() == 2);
        CHECK(std::get<RawAction>(vlan.actions[0]).type == 1);
        CHECK(std::get<FlowMod>(decode_named("flow_mod_delete")).command == flow_command::kDelete);

        const auto ps = std::get<PortStatus>(decode_named("port_status_link_down"));
        CHECK(ps.reason == port_reason::kModify);
        CHECK(ps.port.state == kPortStateLinkDown);
        CHECK(std::get<PortStatus>(decode_named("port_status_delete")).reason == port_reason::kDelete);

        for (const char* name : {"opaque_barrier_request", "opaque_set_config", "opaque_vendor"}) {
            CHECK(std::holds_alternative<Opaque>(decode_named(name)));
        }
    }

    TEST_CASE("randomized round trip decode(encode(m)) == m") {
        std::mt19937_64 rng(99);
        for (int i = 0; i < 5000; ++i) {
            const Message m = random_message(rng);
            const Bytes b = encode(m);
            CHECK(decode_header(b).length == b.size());
            CHECK(decode(b) == m);
        }
    }

    TEST_CASE("encode rejects oversize messages") {
        PacketOut po;
        po.frame.assign(65535, 0);
        CHECK_THROWS_AS(encode(po), EncodeError);
        PacketIn pin;
        pin.frame.assign(65535 - 18, 0);
        CHECK_NOTHROW(encode(pin));
        pin.frame.push_back(0);
        CHECK_THROWS_AS(encode(pin), EncodeError);
    }

    TEST_CASE("decode is total on junk") {
        std::mt19937_64 rng(5);
        int structured = 0;
        for (int i = 0; i < 20000; ++i) {
            Bytes b = random_bytes(rng, rng() % 300);
            if (b.size() >= 4 && rng() % 2) {
                b[0] = kVersion;
                b[1] = static_cast<std::uint8_t>(rng() % 16);
                b[2] = static_cast<std::uint8_t>(b.size() >> 8);
                b[3] = static_cast<std::uint8_t>(b.size());
            }
            try {
                (void)decode(b);
                ++structured;
            } catch (const DecodeError&) {
            }
        }
        CHECK(structured > 0);
    }

    TEST_CASE("stream reader splits concatenated messages") {
        Bytes stream;
        for (const auto& e : corpus()) stream.insert(stream.end(), e.bytes.begin(), e.bytes.end());
        StreamReader r;
        std::vector<Bytes> out;
        for (std::size_t i = 0; i < stream.size(); i += 7) {
            r.feed(ByteView(stream).subspan(i, std::min<std::size_t>(7, stream.size() - i)));
            while (auto m = r.next()) out.push_back(*m);
        }
        REQUIRE(out.size() == corpus().size());
        for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == corpus()[i].bytes);
        CHECK(r.buffered() == 0);
        StreamReader bad;
        bad.feed(from_hex("01 00 00 04 00 00 00 00"));
        CHECK_THROWS_AS(bad.next(), DecodeError);
    }

    TEST_CASE("xid and type accessors") {
        CHECK(xid_of(decode_named("packet_in_tcp")) == 11);
        CHECK(type_of(decode_named("flow_mod_delete")) == 0x0E);
        CHECK(type_of(decode_named("opaque_barrier_request")) == 18);
        CHECK(std::string(type_name(0x0A)) == "PACKET_IN");
    }
}
