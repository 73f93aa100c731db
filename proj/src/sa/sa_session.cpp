#include <algorithm>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "zsdn/bus/frame.hpp"
#include "zsdn/frame.hpp"
#include "zsdn/sa/switch_adapter.hpp"

namespace zsdn::sa {

LbAssigner::LbAssigner(std::uint32_t groups) : groups_(groups) {
    if (groups == 0 || groups > 256) throw std::invalid_argument("LB group count must be in 1..256");
}

std::uint8_t LbAssigner::next() {
    const auto g = static_cast<std::uint8_t>(counter_ % groups_);
    ++counter_;
    return g;
}

SaSession::SaSession(std::uint64_t dpid, std::vector<of::PortDesc> ports, std::uint32_t lb_groups)
    : dpid_(dpid), ports_(std::move(ports)), lb_(lb_groups) {}

topic::SubscriptionPattern SaSession::to_pattern() const {
    Bytes b;
    put_u8(b, topic::code::kTo);
    put_u16(b, topic::code::kSwitchAdapter);
    put_u64(b, dpid_);
    put_u8(b, topic::code::kOpenFlow);
    return topic::SubscriptionPattern::literal(b);
}

std::vector<topic::Topic> SaSession::from_topics() {
    Bytes packet_in{topic::code::kFrom, 0x00, 0x00, topic::code::kOpenFlow, topic::code::kPacketIn};
    return {topic::Topic::from_bytes(packet_in), topic::encode_port_status_topic()};
}

namespace {
Bytes with_dpid(std::uint64_t dpid, ByteView raw) {
    Bytes payload;
    payload.reserve(8 + raw.size());
    put_u64(payload, dpid);
    put_bytes(payload, raw);
    return payload;
}
}  // namespace

std::optional<Publication> SaSession::publish_switch_msg(const of::Message& msg, ByteView raw) {
    if (const auto* pin = std::get_if<of::PacketIn>(&msg)) {
        std::optional<topic::Topic> t;
        try {
            const of::FrameClass fc = of::classify_frame(pin->frame);
            if (fc.ethertype == of::kEthertypeIpv4 && !fc.ip_proto) throw of::ClassifyError("bad IPv4 header");
            t = topic::encode_packet_in_topic(0, fc.ethertype, fc.ip_proto);
        } catch (const std::exception& e) {
            ++counters_.unclassifiable_dropped;
            spdlog::debug("sa {:016x}: dropping unclassifiable PACKET_IN: {}", dpid_, e.what());
            return std::nullopt;
        }
        // The LB counter only advances for PACKET_INs that are published.
        Bytes topic_bytes(t->bytes().begin(), t->bytes().end());
        topic_bytes[topic::kLbGroupOffset] = lb_.next();
        ++counters_.packet_ins_published;
        return Publication{topic::Topic::from_bytes(topic_bytes), with_dpid(dpid_, raw)};
    }
    if (const auto* ps = std::get_if<of::PortStatus>(&msg)) {
        auto it = std::find_if(ports_.begin(), ports_.end(),
                               [&](const of::PortDesc& p) { return p.port_no == ps->port.port_no; });
        if (ps->reason == of::port_reason::kDelete) {
            if (it != ports_.end()) ports_.erase(it);
        } else if (it != ports_.end()) {
            *it = ps->port;
        } else {
            ports_.push_back(ps->port);
        }
        ++counters_.port_status_published;
        return Publication{topic::encode_port_status_topic(), with_dpid(dpid_, raw)};
    }
    ++counters_.ignored_from_switch;
    spdlog::debug("sa {:016x}: not publishing {}", dpid_, of::type_name(of::type_of(msg)));
    return std::nullopt;
}

std::optional<ByteView> SaSession::relay_bus_event(const topic::Topic& topic, ByteView payload) {
    if (!topic::matches(to_pattern(), topic)) {
        ++counters_.relay_dropped;
        return std::nullopt;
    }
    try {
        (void)of::decode(payload);
    } catch (const of::DecodeError& e) {
        ++counters_.relay_dropped;
        spdlog::warn("sa {:016x}: dropping undecodable message from bus: {}", dpid_, e.what());
        return std::nullopt;
    }
    ++counters_.relayed;
    return payload;
}

bus::Reply SaSession::answer_ports_request(ByteView payload) const {
    if (payload.size() != 1 || payload[0] != bus::opcode::kPorts) return bus::Reply{bus::status::kRejected, {}};
    Bytes out;
    put_u16(out, static_cast<std::uint16_t>(ports_.size()));
    for (const auto& p : ports_) put_u16(out, p.port_no);
    return bus::Reply{bus::status::kOk, std::move(out)};
}

std::vector<std::uint16_t> decode_ports_reply(ByteView payload) {
    if (payload.size() < 2) throw bus::ProtocolError("short PORTS reply");
    const std::uint16_t n = get_u16(payload, 0);
    if (payload.size() != 2 + 2 * static_cast<std::size_t>(n)) throw bus::ProtocolError("PORTS reply length mismatch");
    std::vector<std::uint16_t> ports;
    ports.reserve(n);
    for (std::size_t i = 0; i < n; ++i) ports.push_back(get_u16(payload, 2 + 2 * i));
    return ports;
}

}  // namespace zsdn::sa
