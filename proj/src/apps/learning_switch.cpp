#include "zsdn/apps/learning_switch.hpp"

#include <spdlog/spdlog.h>

#include "zsdn/frame.hpp"

namespace zsdn::apps {

void MacTable::learn(std::uint64_t dpid, const MacAddr& mac, std::uint16_t port, Clock::time_point now) {
    entries_[{dpid, mac}] = Entry{port, now};
}

std::optional<std::uint16_t> MacTable::lookup(std::uint64_t dpid, const MacAddr& mac, Clock::time_point now) const {
    auto it = entries_.find({dpid, mac});
    if (it == entries_.end() || now - it->second.learned_at >= age_out_) return std::nullopt;
    return it->second.port;
}

void MacTable::expire(Clock::time_point now) {
    std::erase_if(entries_, [&](const auto& kv) { return now - kv.second.learned_at >= age_out_; });
}

std::vector<of::Message> learning_step(MacTable& table, std::uint64_t dpid, const of::PacketIn& pin,
                                       MacTable::Clock::time_point now) {
    const of::FrameClass fc = of::classify_frame(pin.frame);
    if (!of::is_multicast(fc.eth_src)) table.learn(dpid, fc.eth_src, pin.in_port, now);

    of::PacketOut out;
    out.xid = pin.xid;
    out.buffer_id = pin.buffer_id;
    out.in_port = pin.in_port;
    if (pin.buffer_id == of::kNoBuffer) out.frame = pin.frame;

    std::optional<std::uint16_t> port;
    if (!of::is_multicast(fc.eth_dst)) port = table.lookup(dpid, fc.eth_dst, now);
    if (!port) {
        out.actions.push_back(of::OutputAction{of::port::kFlood, 0});
        return {out};
    }
    if (*port == pin.in_port) {
        // Destination lives behind the ingress port: drop (no actions).
        return {out};
    }
    of::FlowMod fm;
    fm.xid = pin.xid;
    fm.match.wildcards = of::wildcard::kAll & ~of::wildcard::kDlDst;
    fm.match.dl_dst = fc.eth_dst;
    fm.command = of::flow_command::kAdd;
    fm.idle_timeout = kFlowIdleTimeout;
    fm.hard_timeout = 0;
    fm.priority = kFlowPriority;
    fm.buffer_id = of::kNoBuffer;
    fm.out_port = of::port::kNone;
    fm.actions.push_back(of::OutputAction{*port, 0});
    out.actions.push_back(of::OutputAction{*port, 0});
    return {fm, out};
}

topic::SubscriptionPattern packet_in_pattern(std::optional<std::uint8_t> lb_group) {
    Bytes b{topic::code::kFrom, 0x00, 0x00, topic::code::kOpenFlow, topic::code::kPacketIn, lb_group.value_or(0)};
    auto p = topic::SubscriptionPattern::literal(b);
    return lb_group ? p : p.wildcarded(topic::kLbGroupOffset);
}

kernel::KernelConfig LearningSwitch::config(kernel::KernelConfig base, std::optional<std::uint8_t> lb_group) {
    base.controllet_type = kLearningSwitchType;
    base.to_patterns = {packet_in_pattern(lb_group)};
    // FLOW_MOD and PACKET_OUT go to every switch; advertise the TO | SA prefix.
    base.from_topics = {topic::Topic::from_bytes(Bytes{topic::code::kTo, 0x00, 0x00})};
    return base;
}

void LearningSwitch::on_event(kernel::Kernel& k, const topic::Topic&, ByteView payload) {
    if (payload.size() < 8 + of::kHeaderLength) {
        ++malformed_;
        return;
    }
    const std::uint64_t dpid = get_u64(payload, 0);
    of::PacketIn pin;
    try {
        auto msg = of::decode(payload.subspan(8));
        auto* p = std::get_if<of::PacketIn>(&msg);
        if (!p) {
            ++malformed_;
            return;
        }
        pin = std::move(*p);
    } catch (const of::DecodeError& e) {
        ++malformed_;
        spdlog::warn("learning-switch: bad PACKET_IN payload: {}", e.what());
        return;
    }
    std::vector<of::Message> actions;
    try {
        if (of::classify_frame(pin.frame).ethertype == of::kEthertypeLldp) return;
        actions = learning_step(table_, dpid, pin);
    } catch (const of::ClassifyError&) {
        ++malformed_;
        return;
    }
    packet_ins_.fetch_add(1, std::memory_order_relaxed);
    for (const auto& m : actions) {
        const std::uint8_t type = of::type_of(m);
        if (type == topic::code::kFlowMod) {
            flow_mods_.fetch_add(1, std::memory_order_relaxed);
        } else {
            packet_outs_.fetch_add(1, std::memory_order_relaxed);
        }
        k.publish(topic::encode_to_switch_topic(dpid, type), of::encode(m));
    }
}

void LearningSwitch::on_turn_end(kernel::Kernel&) {
    const auto now = MacTable::Clock::now();
    if (now < next_expiry_) return;
    table_.expire(now);
    next_expiry_ = now + std::chrono::seconds(10);
}

LearningSwitchStats LearningSwitch::stats() const {
    return LearningSwitchStats{packet_ins_.load(), flow_mods_.load(), packet_outs_.load(), malformed_.load()};
}

}  // namespace zsdn::apps
