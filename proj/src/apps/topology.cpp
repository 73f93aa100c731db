#include "zsdn/apps/topology.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

#include "zsdn/bus/frame.hpp"
#include "zsdn/sa/switch_adapter.hpp"

namespace zsdn::apps {

namespace {
constexpr std::size_t kLinkBytes = 20;
}

Link Link::canonical(SwitchPort x, SwitchPort y) { return x <= y ? Link{x, y} : Link{y, x}; }

Bytes encode_link(const Link& link) {
    Bytes b;
    b.reserve(kLinkBytes);
    put_u64(b, link.a.dpid);
    put_u16(b, link.a.port);
    put_u64(b, link.b.dpid);
    put_u16(b, link.b.port);
    return b;
}

Link decode_link(ByteView bytes) {
    if (bytes.size() != kLinkBytes) throw bus::ProtocolError("link record must be 20 bytes");
    return Link{{get_u64(bytes, 0), get_u16(bytes, 8)}, {get_u64(bytes, 10), get_u16(bytes, 18)}};
}

Bytes encode_links(const std::vector<Link>& links) {
    Bytes b;
    put_u16(b, static_cast<std::uint16_t>(links.size()));
    for (const auto& l : links) put_bytes(b, encode_link(l));
    return b;
}

std::vector<Link> decode_links(ByteView payload) {
    if (payload.size() < 2) throw bus::ProtocolError("short LINKS reply");
    const std::size_t n = get_u16(payload, 0);
    if (payload.size() != 2 + n * kLinkBytes) throw bus::ProtocolError("LINKS reply length mismatch");
    std::vector<Link> links;
    links.reserve(n);
    for (std::size_t i = 0; i < n; ++i) links.push_back(decode_link(payload.subspan(2 + i * kLinkBytes, kLinkBytes)));
    return links;
}

topic::Topic link_event_topic(std::uint8_t code) {
    return topic::Topic::from_bytes(Bytes{topic::code::kFrom, static_cast<std::uint8_t>(kTopologyType >> 8),
                                          static_cast<std::uint8_t>(kTopologyType & 0xFF), code});
}

std::optional<Link> LinkGraph::observe(SwitchPort from, SwitchPort to, std::uint64_t cycle) {
    edges_[{from, to}] = cycle;
    if (!edges_.contains({to, from})) return std::nullopt;
    const Link link = Link::canonical(from, to);
    if (!up_.insert(link).second) return std::nullopt;
    return link;
}

bool LinkGraph::has_edge(SwitchPort from, SwitchPort to) const { return edges_.contains({from, to}); }

template <typename Pred>
std::vector<Link> LinkGraph::remove_edges(Pred pred) {
    std::vector<Link> down;
    for (auto it = edges_.begin(); it != edges_.end();) {
        if (pred(*it)) {
            const Link link = Link::canonical(it->first.first, it->first.second);
            if (up_.erase(link)) down.push_back(link);
            it = edges_.erase(it);
        } else {
            ++it;
        }
    }
    std::sort(down.begin(), down.end());
    return down;
}

std::vector<Link> LinkGraph::expire(std::uint64_t cycle) {
    return remove_edges([cycle](const auto& kv) { return kv.second + kMissedCyclesAllowed < cycle; });
}

std::vector<Link> LinkGraph::remove_switch(std::uint64_t dpid) {
    return remove_edges([dpid](const auto& kv) { return kv.first.first.dpid == dpid || kv.first.second.dpid == dpid; });
}

std::vector<Link> LinkGraph::remove_port(SwitchPort sp) {
    return remove_edges([sp](const auto& kv) { return kv.first.first == sp || kv.first.second == sp; });
}

std::vector<of::PacketOut> lldp_probes(std::uint64_t dpid, const std::vector<std::uint16_t>& ports) {
    std::vector<of::PacketOut> out;
    out.reserve(ports.size());
    for (std::uint16_t p : ports) {
        of::PacketOut po;
        po.buffer_id = of::kNoBuffer;
        po.in_port = of::port::kNone;
        po.actions.push_back(of::OutputAction{p, 0});
        po.frame = of::build_lldp(dpid, p);
        out.push_back(std::move(po));
    }
    return out;
}

kernel::KernelConfig Topology::config(kernel::KernelConfig base, const TopologyOptions& options) {
    base.controllet_type = kTopologyType;
    Bytes lldp{topic::code::kFrom, 0x00, 0x00, topic::code::kOpenFlow, topic::code::kPacketIn, 0x00, 0x88, 0xCC};
    base.to_patterns = {topic::SubscriptionPattern::literal(lldp).wildcarded(topic::kLbGroupOffset),
                        topic::SubscriptionPattern::literal(topic::encode_port_status_topic())};
    base.from_topics = {link_event_topic(kLinkUp), link_event_topic(kLinkDown),
                        topic::Topic::from_bytes(Bytes{topic::code::kTo, 0x00, 0x00})};
    base.deps.required = {kernel::Requirement{sa::kControlletType, 1}};
    base.tick_period = options.lldp_period;
    return base;
}

void Topology::publish_link(kernel::Kernel& k, std::uint8_t code, const Link& link) {
    spdlog::info("topology: link {} {:x}:{} - {:x}:{}", code == kLinkUp ? "up" : "down", link.a.dpid, link.a.port,
                 link.b.dpid, link.b.port);
    k.publish(link_event_topic(code), encode_link(link));
}

void Topology::publish_changes(kernel::Kernel& k, const std::vector<Link>& down) {
    if (k.state() == kernel::LifecycleState::Active) {
        for (const auto& l : down) publish_link(k, kLinkDown, l);
    }
    std::lock_guard lock(snapshot_mutex_);
    snapshot_ = graph_.links();
}

void Topology::on_event(kernel::Kernel& k, const topic::Topic& topic, ByteView payload) {
    if (payload.size() < 8 + of::kHeaderLength) return;
    const std::uint64_t dpid = get_u64(payload, 0);
    of::Message msg;
    try {
        msg = of::decode(payload.subspan(8));
    } catch (const of::DecodeError& e) {
        spdlog::warn("topology: bad payload on {}: {}", topic.to_hex(), e.what());
        return;
    }
    if (const auto* ps = std::get_if<of::PortStatus>(&msg)) {
        const bool gone = ps->reason == of::port_reason::kDelete || (ps->port.state & of::kPortStateLinkDown) != 0;
        if (gone) publish_changes(k, graph_.remove_port({dpid, ps->port.port_no}));
        return;
    }
    const auto* pin = std::get_if<of::PacketIn>(&msg);
    if (!pin) return;
    of::LldpOrigin origin;
    try {
        origin = of::decode_lldp(pin->frame);
    } catch (const std::exception&) {
        return;
    }
    if (auto up = graph_.observe({origin.dpid, origin.port}, {dpid, pin->in_port}, cycle_.load())) {
        publish_link(k, kLinkUp, *up);
        publish_changes(k, {});
    }
}

bus::Reply Topology::on_request(kernel::Kernel&, std::uint64_t, ByteView payload) {
    if (payload.size() != 1 || payload[0] != bus::opcode::kLinks) return bus::Reply{bus::status::kRejected, {}};
    return bus::Reply{bus::status::kOk, encode_links(graph_.links())};
}

void Topology::on_member(kernel::Kernel& k, const kernel::Member& m, bool joined) {
    if (joined || m.controllet_type != sa::kControlletType) return;
    publish_changes(k, graph_.remove_switch(m.instance_id));
}

void Topology::on_tick(kernel::Kernel& k) {
    const std::uint64_t cycle = cycle_.fetch_add(1) + 1;
    const auto timeout = std::min(options_.lldp_period, std::chrono::milliseconds(1000));
    const Bytes ports_request{bus::opcode::kPorts};
    for (std::uint64_t dpid : k.registry().instances_of(sa::kControlletType)) {
        std::vector<std::uint16_t> ports;
        try {
            const bus::Reply r = k.request(dpid, ports_request, timeout);
            if (r.status != bus::status::kOk) continue;
            ports = sa::decode_ports_reply(r.payload);
        } catch (const bus::RequestTimeout&) {
            spdlog::debug("topology: PORTS request to {:016x} timed out", dpid);
            continue;
        } catch (const bus::ProtocolError& e) {
            spdlog::warn("topology: bad PORTS reply from {:016x}: {}", dpid, e.what());
            continue;
        }
        for (auto& po : lldp_probes(dpid, ports)) {
            po.xid = next_xid_++;
            k.publish(topic::encode_to_switch_topic(dpid, topic::code::kPacketOut), of::encode(po));
        }
    }
    publish_changes(k, graph_.expire(cycle));
}

std::vector<Link> Topology::links() const {
    std::lock_guard lock(snapshot_mutex_);
    return snapshot_;
}

}  // namespace zsdn::apps
