#include "zsdn/topic.hpp"

#include <stdexcept>

namespace zsdn::topic {

namespace {

void check_length(std::size_t n) {
    if (n == 0 || n > kMaxLength) {
        throw std::invalid_argument("topic length must be 1.." + std::to_string(kMaxLength) + ", got " +
                                    std::to_string(n));
    }
}

int hex_digit(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

}  // namespace

Topic Topic::from_bytes(ByteView bytes) {
    check_length(bytes.size());
    if (bytes[0] != code::kTo && bytes[0] != code::kFrom) {
        throw std::invalid_argument("topic direction byte must be 01 or 02, got " + zsdn::to_hex(bytes.first(1)));
    }
    return Topic(Bytes(bytes.begin(), bytes.end()));
}

SubscriptionPattern SubscriptionPattern::literal(ByteView bytes) {
    check_length(bytes.size());
    Bytes mask((bytes.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < bytes.size(); ++i) mask[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
    return SubscriptionPattern(Bytes(bytes.begin(), bytes.end()), std::move(mask));
}

SubscriptionPattern SubscriptionPattern::with_mask(ByteView bytes, ByteView mask) {
    check_length(bytes.size());
    if (mask.size() * 8 < bytes.size()) throw std::invalid_argument("wildcard mask shorter than pattern");
    Bytes normalized(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>((bytes.size() + 7) / 8));
    for (std::size_t bit = bytes.size(); bit < mask.size() * 8; ++bit) {
        if (mask[bit / 8] & (0x80u >> (bit % 8))) throw std::invalid_argument("wildcard mask has bits past pattern end");
    }
    // Wildcarded bytes are stored as zero so equal patterns compare equal.
    Bytes stored(bytes.begin(), bytes.end());
    SubscriptionPattern p(std::move(stored), std::move(normalized));
    for (std::size_t i = 0; i < p.bytes_.size(); ++i) {
        if (!p.is_literal(i)) p.bytes_[i] = 0;
    }
    return p;
}

SubscriptionPattern SubscriptionPattern::wildcarded(std::size_t i) const {
    if (i >= bytes_.size()) throw std::out_of_range("wildcard index past pattern end");
    SubscriptionPattern copy = *this;
    copy.mask_[i / 8] &= static_cast<std::uint8_t>(~(0x80u >> (i % 8)));
    copy.bytes_[i] = 0;
    return copy;
}

std::string SubscriptionPattern::to_text() const {
    std::string out;
    for (std::size_t i = 0; i < bytes_.size(); ++i) {
        out += is_literal(i) ? zsdn::to_hex(ByteView(&bytes_[i], 1)) : std::string("??");
    }
    return out;
}

bool matches(const SubscriptionPattern& pattern, ByteView topic) noexcept {
    const ByteView bytes = pattern.bytes();
    if (bytes.size() > topic.size()) return false;
    const ByteView mask = pattern.mask();
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        if ((mask[i >> 3] & (0x80u >> (i & 7))) && bytes[i] != topic[i]) return false;
    }
    return true;
}

Topic encode_packet_in_topic(std::uint8_t lb_group, std::uint16_t ethertype, std::optional<std::uint8_t> ip_proto) {
    if (ip_proto && ethertype != code::kIpv4) {
        throw std::invalid_argument("ip_proto layer only exists below IPv4");
    }
    if (!ip_proto && ethertype == code::kIpv4) {
        throw std::invalid_argument("IPv4 PACKET_IN topics require an ip_proto layer");
    }
    Bytes b;
    b.reserve(9);
    put_u8(b, code::kFrom);
    put_u16(b, code::kSwitchAdapter);
    put_u8(b, code::kOpenFlow);
    put_u8(b, code::kPacketIn);
    put_u8(b, lb_group);
    put_u16(b, ethertype);
    if (ip_proto) put_u8(b, *ip_proto);
    return Topic::from_bytes(b);
}

Topic encode_to_switch_topic(std::uint64_t switch_instance, std::uint8_t of_msg_type) {
    Bytes b;
    b.reserve(13);
    put_u8(b, code::kTo);
    put_u16(b, code::kSwitchAdapter);
    put_u64(b, switch_instance);
    put_u8(b, code::kOpenFlow);
    put_u8(b, of_msg_type);
    return Topic::from_bytes(b);
}

Topic encode_port_status_topic() {
    Bytes b;
    put_u8(b, code::kFrom);
    put_u16(b, code::kSwitchAdapter);
    put_u8(b, code::kOpenFlow);
    put_u8(b, code::kPortStatus);
    return Topic::from_bytes(b);
}

SubscriptionPattern pattern_from_text(std::string_view text) {
    Bytes bytes;
    std::vector<bool> literal;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t dot = text.find('.', start);
        std::string_view token = text.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start);
        if (token.empty() || token.size() % 2 != 0) {
            throw std::invalid_argument("pattern token '" + std::string(token) + "' must be non-empty hex pairs");
        }
        for (std::size_t i = 0; i < token.size(); i += 2) {
            if (token[i] == '?' && token[i + 1] == '?') {
                bytes.push_back(0);
                literal.push_back(false);
                continue;
            }
            int hi = hex_digit(token[i]);
            int lo = hex_digit(token[i + 1]);
            if (hi < 0 || lo < 0) {
                throw std::invalid_argument("invalid hex pair '" + std::string(token.substr(i, 2)) + "' in pattern");
            }
            bytes.push_back(static_cast<std::uint8_t>((hi << 4) | lo));
            literal.push_back(true);
        }
        if (dot == std::string_view::npos) break;
        start = dot + 1;
    }
    Bytes mask((bytes.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < literal.size(); ++i) {
        if (literal[i]) mask[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
    }
    return SubscriptionPattern::with_mask(bytes, mask);
}

}  // namespace zsdn::topic
