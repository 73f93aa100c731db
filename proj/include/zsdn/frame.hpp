#pragma once

// Ethernet frame classification and the controller's own LLDP probes.

#include <cstdint>
#include <optional>
#include <stdexcept>

#include "zsdn/bytes.hpp"

namespace zsdn::of {

inline constexpr std::uint16_t kEthertypeIpv4 = 0x0800;
inline constexpr std::uint16_t kEthertypeArp = 0x0806;
inline constexpr std::uint16_t kEthertypeLldp = 0x88CC;
inline constexpr std::uint16_t kEthertypeVlan = 0x8100;
inline constexpr std::size_t kEthernetHeaderLength = 14;
inline constexpr std::uint16_t kLldpTtlSeconds = 120;
inline constexpr MacAddr kLldpMulticast{0x01, 0x80, 0xC2, 0x00, 0x00, 0x0E};

struct FrameClass {
    MacAddr eth_dst{};
    MacAddr eth_src{};
    std::uint16_t ethertype = 0;
    std::optional<std::uint8_t> ip_proto;
    friend bool operator==(const FrameClass&, const FrameClass&) = default;
};

class ClassifyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Reads MACs and ethertype; for IPv4 also the protocol byte. A truncated or
/// malformed IPv4 header leaves ip_proto empty. Throws ClassifyError on
/// frames shorter than an Ethernet header.
FrameClass classify_frame(ByteView frame);

inline bool is_multicast(const MacAddr& mac) { return (mac[0] & 0x01) != 0; }

/// LLDP frame advertising (dpid, port) with locally assigned chassis and
/// port id subtypes and a fixed 120 s TTL.
Bytes build_lldp(std::uint64_t chassis_dpid, std::uint16_t port_no);

struct LldpOrigin {
    std::uint64_t dpid = 0;
    std::uint16_t port = 0;
    friend bool operator==(const LldpOrigin&, const LldpOrigin&) = default;
};

/// LLDP frame that was not produced by build_lldp.
class NotOurLldp : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inverse of build_lldp. Throws std::invalid_argument for non-LLDP frames
/// and NotOurLldp for foreign TLV layouts.
LldpOrigin decode_lldp(ByteView frame);

/// Minimal Ethernet/IPv4/UDP frame used by tests and the harness.
Bytes build_udp_frame(const MacAddr& src, const MacAddr& dst, std::uint16_t payload_len = 18);
Bytes build_arp_frame(const MacAddr& src, const MacAddr& dst);

}  // namespace zsdn::of
