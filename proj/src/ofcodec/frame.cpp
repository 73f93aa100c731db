#include "zsdn/frame.hpp"

namespace zsdn::of {

namespace {

constexpr std::uint8_t kTlvEnd = 0;
constexpr std::uint8_t kTlvChassisId = 1;
constexpr std::uint8_t kTlvPortId = 2;
constexpr std::uint8_t kTlvTtl = 3;
constexpr std::uint8_t kSubtypeLocal = 7;

void put_tlv_header(Bytes& out, std::uint8_t type, std::uint16_t len) {
    put_u16(out, static_cast<std::uint16_t>((type << 9) | (len & 0x01FF)));
}

}  // namespace

FrameClass classify_frame(ByteView frame) {
    if (frame.size() < kEthernetHeaderLength) {
        throw ClassifyError("frame of " + std::to_string(frame.size()) + " bytes is shorter than an Ethernet header");
    }
    FrameClass fc;
    fc.eth_dst = get_mac(frame, 0);
    fc.eth_src = get_mac(frame, 6);
    fc.ethertype = get_u16(frame, 12);
    if (fc.ethertype == kEthertypeIpv4) {
        const ByteView ip = frame.subspan(kEthernetHeaderLength);
        if (ip.size() >= 20 && (ip[0] >> 4) == 4 && (ip[0] & 0x0F) >= 5) {
            fc.ip_proto = ip[9];
        }
    }
    return fc;
}

Bytes build_lldp(std::uint64_t chassis_dpid, std::uint16_t port_no) {
    Bytes out;
    out.reserve(40);
    put_bytes(out, kLldpMulticast);
    // Source MAC is derived from the dpid only, so probes differ solely in the port TLV.
    put_u8(out, 0x02);
    for (int shift = 32; shift >= 0; shift -= 8) put_u8(out, static_cast<std::uint8_t>(chassis_dpid >> shift));
    put_u16(out, kEthertypeLldp);

    put_tlv_header(out, kTlvChassisId, 9);
    put_u8(out, kSubtypeLocal);
    put_u64(out, chassis_dpid);

    put_tlv_header(out, kTlvPortId, 3);
    put_u8(out, kSubtypeLocal);
    put_u16(out, port_no);

    put_tlv_header(out, kTlvTtl, 2);
    put_u16(out, kLldpTtlSeconds);

    put_tlv_header(out, kTlvEnd, 0);
    return out;
}

LldpOrigin decode_lldp(ByteView frame) {
    const FrameClass fc = classify_frame(frame);
    if (fc.ethertype != kEthertypeLldp) throw std::invalid_argument("decode_lldp: not an LLDP frame");

    std::size_t off = kEthernetHeaderLength;
    auto tlv = [&](std::uint8_t want_type, std::uint16_t want_len) -> std::size_t {
        if (off + 2 > frame.size()) throw NotOurLldp("truncated TLV header");
        const std::uint16_t h = get_u16(frame, off);
        const std::uint8_t type = static_cast<std::uint8_t>(h >> 9);
        const std::uint16_t len = h & 0x01FF;
        if (type != want_type || len != want_len) throw NotOurLldp("unexpected TLV type/length");
        if (off + 2 + len > frame.size()) throw NotOurLldp("truncated TLV body");
        const std::size_t body = off + 2;
        off = body + len;
        return body;
    };

    const std::size_t chassis = tlv(kTlvChassisId, 9);
    if (frame[chassis] != kSubtypeLocal) throw NotOurLldp("chassis id subtype is not locally assigned");
    const std::size_t port = tlv(kTlvPortId, 3);
    if (frame[port] != kSubtypeLocal) throw NotOurLldp("port id subtype is not locally assigned");
    tlv(kTlvTtl, 2);
    tlv(kTlvEnd, 0);
    return LldpOrigin{get_u64(frame, chassis + 1), get_u16(frame, port + 1)};
}

Bytes build_udp_frame(const MacAddr& src, const MacAddr& dst, std::uint16_t payload_len) {
    Bytes out;
    put_bytes(out, dst);
    put_bytes(out, src);
    put_u16(out, kEthertypeIpv4);
    const std::uint16_t ip_len = static_cast<std::uint16_t>(20 + 8 + payload_len);
    // IPv4 header: no options, TTL 64, protocol UDP. Addresses taken from the MAC tails.
    put_u8(out, 0x45);
    put_u8(out, 0);
    put_u16(out, ip_len);
    put_u32(out, 0);
    put_u8(out, 64);
    put_u8(out, 0x11);
    put_u16(out, 0);
    put_u32(out, 0x0A000000u | (static_cast<std::uint32_t>(src[4]) << 8) | src[5]);
    put_u32(out, 0x0A000000u | (static_cast<std::uint32_t>(dst[4]) << 8) | dst[5]);
    put_u16(out, 40000);
    put_u16(out, 9);
    put_u16(out, static_cast<std::uint16_t>(8 + payload_len));
    put_u16(out, 0);
    put_zeros(out, payload_len);
    return out;
}

Bytes build_arp_frame(const MacAddr& src, const MacAddr& dst) {
    Bytes out;
    put_bytes(out, dst);
    put_bytes(out, src);
    put_u16(out, kEthertypeArp);
    put_u16(out, 1);       // htype ethernet
    put_u16(out, 0x0800);  // ptype ipv4
    put_u8(out, 6);
    put_u8(out, 4);
    put_u16(out, 1);  // request
    put_bytes(out, src);
    put_u32(out, 0x0A000000u | src[5]);
    put_zeros(out, 6);
    put_u32(out, 0x0A000000u | dst[5]);
    return out;
}

}  // namespace zsdn::of
