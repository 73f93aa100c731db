#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "zsdn/topic.hpp"

using namespace zsdn;
using namespace zsdn::topic;

namespace {

Topic T(const std::string& hex) { return Topic::from_bytes(from_hex(hex)); }
SubscriptionPattern L(const std::string& hex) { return SubscriptionPattern::literal(from_hex(hex)); }

}  // namespace

TEST_SUITE("topic") {
    TEST_CASE("packet-in topics") {
        CHECK(encode_packet_in_topic(0x00, 0x0800, 0x06) == T("02 00 00 00 0A 00 08 00 06"));
        CHECK(encode_packet_in_topic(0x00, 0x0806, std::nullopt) == T("02 00 00 00 0A 00 08 06"));
        CHECK(encode_packet_in_topic(0x03, 0x0800, 0x11) == T("02 00 00 00 0A 03 08 00 11"));
        CHECK(encode_packet_in_topic(0x00, 0x88CC, std::nullopt).size() == 8);
    }

    TEST_CASE("packet-in ip_proto presence must follow the ethertype") {
        CHECK_THROWS_AS(encode_packet_in_topic(0, 0x0806, 0x06), std::invalid_argument);
        CHECK_THROWS_AS(encode_packet_in_topic(0, 0x0800, std::nullopt), std::invalid_argument);
    }

    TEST_CASE("to-switch topics") {
        CHECK(encode_to_switch_topic(1, 0x0E) == T("01 00 00 00 00 00 00 00 00 00 01 00 0E"));
        CHECK(encode_to_switch_topic(1, 0x0D) == T("01 00 00 00 00 00 00 00 00 00 01 00 0D"));
        CHECK(encode_to_switch_topic(0xFFFFFFFFFFFFFFFF, 0x0D) == T("01 00 00 FF FF FF FF FF FF FF FF 00 0D"));
    }

    TEST_CASE("port-status topic") {
        CHECK(encode_port_status_topic() == T("02 00 00 00 0C"));
        CHECK(matches(L("02 00 00"), encode_port_status_topic()));
        CHECK_FALSE(matches(L("01 00 00"), encode_port_status_topic()));
    }

    TEST_CASE("encoding lengths are constant per shape") {
        std::mt19937_64 rng(3);
        for (int i = 0; i < 500; ++i) {
            CHECK(encode_to_switch_topic(rng(), static_cast<std::uint8_t>(rng())).size() == 13);
            const auto lb = static_cast<std::uint8_t>(rng());
            CHECK(encode_packet_in_topic(lb, 0x0800, static_cast<std::uint8_t>(rng())).size() == 9);
            auto et = static_cast<std::uint16_t>(rng());
            if (et == 0x0800) et = 0x0801;
            CHECK(encode_packet_in_topic(lb, et, std::nullopt).size() == 8);
        }
    }

    TEST_CASE("match examples") {
        CHECK(matches(L("02 00 00 00 0A"), T("02 00 00 00 0A 00 08 00 06")));
        const auto p = SubscriptionPattern::with_mask(from_hex("02 00 00 00 0A 00 08 06"), from_hex("FB"));
        CHECK_FALSE(p.is_literal(5));
        CHECK(matches(p, T("02 00 00 00 0A 07 08 06")));
        CHECK_FALSE(matches(p, T("02 00 00 00 0A 07 08 00 06")));
        CHECK_FALSE(matches(L("02 00 00 00 0A 00"), T("02 00 00 00 0C")));
    }

    TEST_CASE("wildcarded bytes are normalized to zero") {
        const auto p = SubscriptionPattern::with_mask(from_hex("02 00 00 00 0A 55"), from_hex("F8"));
        CHECK(p.bytes()[5] == 0);
        CHECK(p == L("02 00 00 00 0A 00").wildcarded(5));
    }

    TEST_CASE("mask validation") {
        CHECK_THROWS_AS(SubscriptionPattern::with_mask(from_hex("02 00"), Bytes{}), std::invalid_argument);
        CHECK_THROWS_AS(SubscriptionPattern::with_mask(from_hex("02 00"), from_hex("E0")), std::invalid_argument);
        CHECK_THROWS_AS(SubscriptionPattern::literal(Bytes{}), std::invalid_argument);
        CHECK_THROWS_AS(SubscriptionPattern::literal(Bytes(65, 1)), std::invalid_argument);
        CHECK_NOTHROW(SubscriptionPattern::literal(Bytes(64, 1)));
    }

    TEST_CASE("topic validation") {
        CHECK_THROWS_AS(Topic::from_bytes(Bytes{}), std::invalid_argument);
        CHECK_THROWS_AS(Topic::from_bytes(from_hex("03")), std::invalid_argument);
        CHECK_THROWS_AS(Topic::from_bytes(Bytes(65, 2)), std::invalid_argument);
        CHECK_NOTHROW(Topic::from_bytes(from_hex("01")));
    }

    TEST_CASE("pattern text") {
        CHECK(pattern_from_text("02.0000.00.0A") == L("02 00 00 00 0A"));
        const auto p = pattern_from_text("02.0000.00.0A.??");
        CHECK(p.size() == 6);
        CHECK_FALSE(p.is_literal(5));
        for (std::size_t i = 0; i < 5; ++i) CHECK(p.is_literal(i));
        CHECK(pattern_from_text("0200??0A") == pattern_from_text("02.00.??.0A"));
        CHECK_THROWS_AS(pattern_from_text("02.0000.0G"), std::invalid_argument);
        CHECK_THROWS_AS(pattern_from_text("02.000"), std::invalid_argument);
        CHECK_THROWS_AS(pattern_from_text(""), std::invalid_argument);
        CHECK_THROWS_AS(pattern_from_text("02.?"), std::invalid_argument);
        CHECK(pattern_from_text(p.to_text()) == p);
    }

    TEST_CASE("exhaustive agreement with the reference matcher, length <= 3 over {0,1}") {
        // Topics must start with a direction byte, so the matcher is driven
        // through the raw-bytes overload here.
        std::vector<std::vector<std::uint8_t>> strings;
        for (std::size_t len = 0; len <= 3; ++len) {
            for (unsigned bits = 0; bits < (1u << len); ++bits) {
                std::vector<std::uint8_t> s(len);
                for (std::size_t i = 0; i < len; ++i) s[i] = (bits >> i) & 1u;
                strings.push_back(s);
            }
        }
        std::size_t cases = 0;
        std::size_t disagreements = 0;
        for (const auto& pat : strings) {
            if (pat.empty()) continue;
            for (unsigned m = 0; m < (1u << pat.size()); ++m) {
                std::vector<bool> literal(pat.size());
                for (std::size_t i = 0; i < pat.size(); ++i) literal[i] = (m >> i) & 1u;
                const auto p = SubscriptionPattern::with_mask(Bytes(pat.begin(), pat.end()), testing::pack_mask(literal));
                for (const auto& t : strings) {
                    ++cases;
                    if (matches(p, ByteView(t.data(), t.size())) != testing::reference_matches(pat, literal, t)) ++disagreements;
                }
            }
        }
        // 84 (pattern, mask) pairs of length 1..3 against 15 strings of length 0..3.
        CHECK(cases == 84 * 15);
        CHECK(disagreements == 0);
    }

    TEST_CASE("random agreement with the reference matcher") {
        std::mt19937_64 rng(20240601);
        std::size_t disagreements = 0;
        for (int n = 0; n < 10000; ++n) {
            const std::size_t plen = 1 + rng() % 16;
            const std::size_t tlen = 1 + rng() % 16;
            std::vector<std::uint8_t> pat(plen);
            std::vector<std::uint8_t> top(tlen);
            std::vector<bool> literal(plen);
            // A small alphabet keeps matches frequent.
            for (auto& b : pat) b = static_cast<std::uint8_t>(rng() % 3);
            for (auto& b : top) b = static_cast<std::uint8_t>(rng() % 3);
            for (std::size_t i = 0; i < plen; ++i) literal[i] = rng() % 4 != 0;
            for (std::size_t i = 0; i < plen; ++i) if (!literal[i]) pat[i] = 0;
            const auto p = SubscriptionPattern::with_mask(Bytes(pat.begin(), pat.end()), testing::pack_mask(literal));
            if (matches(p, ByteView(top.data(), top.size())) != testing::reference_matches(pat, literal, top)) ++disagreements;
        }
        CHECK(disagreements == 0);
    }

    TEST_CASE("prefix and wildcard monotonicity") {
        std::mt19937_64 rng(7);
        for (int n = 0; n < 3000; ++n) {
            const std::size_t plen = 1 + rng() % 8;
            Bytes pat(plen);
            for (auto& b : pat) b = static_cast<std::uint8_t>(rng() % 2);
            auto p = SubscriptionPattern::literal(pat);
            for (std::size_t i = 0; i < plen; ++i) {
                if (rng() % 3 == 0) p = p.wildcarded(i);
            }
            Bytes t(1 + rng() % 10);
            for (auto& b : t) b = static_cast<std::uint8_t>(rng() % 2);
            const bool m = matches(p, t);
            CHECK(m == matches(p, t));  // deterministic
            if (m) {
                Bytes longer = t;
                longer.push_back(static_cast<std::uint8_t>(rng()));
                CHECK(matches(p, longer));
            }
            const auto wider = p.wildcarded(rng() % plen);
            if (m) CHECK(matches(wider, t));
        }
    }

    TEST_CASE("literal pattern is a plain prefix filter") {
        std::mt19937_64 rng(11);
        for (int n = 0; n < 2000; ++n) {
            Bytes pat(1 + rng() % 6);
            Bytes t(1 + rng() % 8);
            for (auto& b : pat) b = static_cast<std::uint8_t>(rng() % 2);
            for (auto& b : t) b = static_cast<std::uint8_t>(rng() % 2);
            const bool prefix = pat.size() <= t.size() && std::equal(pat.begin(), pat.end(), t.begin());
            CHECK(matches(SubscriptionPattern::literal(pat), t) == prefix);
        }
    }
}
