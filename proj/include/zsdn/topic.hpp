#pragma once

// Hierarchical binary topics and wildcard subscription patterns.
//
// A topic is a concatenation of fixed-width layers, most significant layer
// first. The SwitchAdapter hierarchy looks like this:
//
//   TO   (1) | SWITCH_ADAPTER (2) | SWITCH_INSTANCE (8) | OPENFLOW (1) | OF_MSG_TYPE (1)
//   FROM (1) | SWITCH_ADAPTER (2) | OPENFLOW (1) | PACKET_IN (1) | LB_GROUP (1) | ETHERTYPE (2) [| IP_PROTO (1)]
//   FROM (1) | SWITCH_ADAPTER (2) | OPENFLOW (1) | PORT_STATUS (1)
//
// A subscription pattern is a topic-shaped byte string plus a per-byte
// literal mask. It matches every topic that starts with the pattern, where
// wildcarded bytes match anything.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "zsdn/bytes.hpp"

namespace zsdn::topic {

inline constexpr std::size_t kMaxLength = 64;

namespace code {
inline constexpr std::uint8_t kTo = 0x01;
inline constexpr std::uint8_t kFrom = 0x02;
inline constexpr std::uint16_t kSwitchAdapter = 0x0000;
inline constexpr std::uint8_t kOpenFlow = 0x00;
inline constexpr std::uint8_t kPacketIn = 0x0A;
inline constexpr std::uint8_t kPortStatus = 0x0C;
inline constexpr std::uint8_t kPacketOut = 0x0D;
inline constexpr std::uint8_t kFlowMod = 0x0E;
inline constexpr std::uint8_t kDefaultLbGroup = 0x00;
inline constexpr std::uint16_t kIpv4 = 0x0800;
inline constexpr std::uint16_t kArp = 0x0806;
inline constexpr std::uint8_t kTcp = 0x06;
inline constexpr std::uint8_t kUdp = 0x11;
}  // namespace code

/// Layer widths in bytes.
namespace width {
inline constexpr std::size_t kDirection = 1;
inline constexpr std::size_t kControlletType = 2;
inline constexpr std::size_t kSwitchInstance = 8;
inline constexpr std::size_t kOpenFlow = 1;
inline constexpr std::size_t kOfMsgType = 1;
inline constexpr std::size_t kLbGroup = 1;
inline constexpr std::size_t kEthertype = 2;
inline constexpr std::size_t kIpProto = 1;
}  // namespace width

/// Byte offset of the LB_GROUP layer inside PACKET_IN topics.
inline constexpr std::size_t kLbGroupOffset =
    width::kDirection + width::kControlletType + width::kOpenFlow + width::kOfMsgType;

class Topic {
public:
    /// Throws std::invalid_argument unless 1 <= size <= 64 and byte 0 is TO or FROM.
    static Topic from_bytes(ByteView bytes);

    ByteView bytes() const { return bytes_; }
    std::size_t size() const { return bytes_.size(); }
    std::uint8_t operator[](std::size_t i) const { return bytes_[i]; }
    std::string to_hex() const { return zsdn::to_hex(bytes_); }

    friend bool operator==(const Topic&, const Topic&) = default;
    friend auto operator<=>(const Topic&, const Topic&) = default;

private:
    explicit Topic(Bytes bytes) : bytes_(std::move(bytes)) {}
    Bytes bytes_;
};

class SubscriptionPattern {
public:
    /// All bytes literal; behaves as a plain prefix filter.
    static SubscriptionPattern literal(ByteView bytes);
    static SubscriptionPattern literal(const Topic& prefix) { return literal(prefix.bytes()); }

    /// `mask` holds one bit per byte, MSB first; a set bit marks a literal byte.
    /// Throws std::invalid_argument if the mask is too short, has bits set past
    /// the pattern length, or the length is outside 1..64.
    static SubscriptionPattern with_mask(ByteView bytes, ByteView mask);

    ByteView bytes() const { return bytes_; }
    ByteView mask() const { return mask_; }
    std::size_t size() const { return bytes_.size(); }
    bool is_literal(std::size_t i) const { return (mask_[i / 8] & (0x80u >> (i % 8))) != 0; }

    /// Copy of this pattern with byte `i` turned into a wildcard.
    SubscriptionPattern wildcarded(std::size_t i) const;

    /// Dot-free text form: hex pairs, "??" for wildcards.
    std::string to_text() const;

    friend bool operator==(const SubscriptionPattern&, const SubscriptionPattern&) = default;

private:
    SubscriptionPattern(Bytes bytes, Bytes mask) : bytes_(std::move(bytes)), mask_(std::move(mask)) {}
    Bytes bytes_;
    Bytes mask_;
};

/// Prefix-with-wildcards match over raw topic bytes.
bool matches(const SubscriptionPattern& pattern, ByteView topic) noexcept;

inline bool matches(const SubscriptionPattern& pattern, const Topic& topic) noexcept {
    return matches(pattern, topic.bytes());
}

/// FROM | SWITCH_ADAPTER | OPENFLOW | PACKET_IN | lb_group | ethertype [| ip_proto].
/// Throws std::invalid_argument when ip_proto is given for a non-IPv4 ethertype
/// or omitted for IPv4.
Topic encode_packet_in_topic(std::uint8_t lb_group, std::uint16_t ethertype, std::optional<std::uint8_t> ip_proto);

/// TO | SWITCH_ADAPTER | switch_instance | OPENFLOW | of_msg_type (13 bytes).
Topic encode_to_switch_topic(std::uint64_t switch_instance, std::uint8_t of_msg_type);

/// FROM | SWITCH_ADAPTER | OPENFLOW | PORT_STATUS.
Topic encode_port_status_topic();

/// Parses "02.0000.00.0A.??": hex pairs or "??" per byte, '.' separators optional.
/// Throws std::invalid_argument on odd-length tokens or non-hex digits.
SubscriptionPattern pattern_from_text(std::string_view text);

}  // namespace zsdn::topic
