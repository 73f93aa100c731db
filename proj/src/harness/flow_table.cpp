#include "zsdn/harness/flow_table.hpp"

#include <algorithm>

#include "zsdn/frame.hpp"

namespace zsdn::harness {

namespace {

std::uint32_t prefix_mask(std::uint32_t wildcards, int shift) {
    const std::uint32_t n = (wildcards >> shift) & 0x3F;
    if (n >= 32) return 0;
    return ~std::uint32_t{0} << n;
}

bool is_output_only(const std::vector<of::Action>& actions) {
    return std::all_of(actions.begin(), actions.end(),
                       [](const of::Action& a) { return std::holds_alternative<of::OutputAction>(a); });
}

}  // namespace

std::optional<PacketFields> extract_fields(std::uint16_t in_port, ByteView frame) {
    if (frame.size() < of::kEthernetHeaderLength) return std::nullopt;
    PacketFields f;
    f.in_port = in_port;
    f.dl_dst = get_mac(frame, 0);
    f.dl_src = get_mac(frame, 6);
    std::size_t off = 12;
    f.dl_type = get_u16(frame, off);
    off += 2;
    if (f.dl_type == of::kEthertypeVlan && frame.size() >= off + 4) {
        const std::uint16_t tci = get_u16(frame, off);
        f.dl_vlan = tci & 0x0FFF;
        f.dl_vlan_pcp = static_cast<std::uint8_t>(tci >> 13);
        f.dl_type = get_u16(frame, off + 2);
        off += 4;
    }
    if (f.dl_type == of::kEthertypeIpv4 && frame.size() >= off + 20) {
        const std::size_t ihl = (frame[off] & 0x0F) * 4u;
        f.nw_tos = frame[off + 1] & 0xFC;
        f.nw_proto = frame[off + 9];
        f.nw_src = get_u32(frame, off + 12);
        f.nw_dst = get_u32(frame, off + 16);
        const std::size_t l4 = off + ihl;
        const bool first_fragment = (get_u16(frame, off + 6) & 0x1FFF) == 0;
        if (ihl >= 20 && first_fragment) {
            if ((f.nw_proto == 6 || f.nw_proto == 17) && frame.size() >= l4 + 4) {
                f.tp_src = get_u16(frame, l4);
                f.tp_dst = get_u16(frame, l4 + 2);
            } else if (f.nw_proto == 1 && frame.size() >= l4 + 2) {
                f.tp_src = frame[l4];
                f.tp_dst = frame[l4 + 1];
            }
        }
    } else if (f.dl_type == of::kEthertypeArp && frame.size() >= off + 28) {
        f.nw_proto = static_cast<std::uint8_t>(get_u16(frame, off + 6) & 0xFF);
        f.nw_src = get_u32(frame, off + 14);
        f.nw_dst = get_u32(frame, off + 24);
    }
    return f;
}

bool match_packet(const of::Match& m, const PacketFields& f) {
    namespace w = of::wildcard;
    const std::uint32_t wc = m.wildcards;
    if (!(wc & w::kInPort) && m.in_port != f.in_port) return false;
    if (!(wc & w::kDlVlan) && m.dl_vlan != f.dl_vlan) return false;
    if (!(wc & w::kDlSrc) && m.dl_src != f.dl_src) return false;
    if (!(wc & w::kDlDst) && m.dl_dst != f.dl_dst) return false;
    if (!(wc & w::kDlType) && m.dl_type != f.dl_type) return false;
    if (!(wc & w::kNwProto) && m.nw_proto != f.nw_proto) return false;
    if (!(wc & w::kTpSrc) && m.tp_src != f.tp_src) return false;
    if (!(wc & w::kTpDst) && m.tp_dst != f.tp_dst) return false;
    if (!(wc & w::kDlVlanPcp) && m.dl_vlan_pcp != f.dl_vlan_pcp) return false;
    if (!(wc & w::kNwTos) && m.nw_tos != f.nw_tos) return false;
    const std::uint32_t src_mask = prefix_mask(wc, w::kNwSrcShift);
    if ((m.nw_src & src_mask) != (f.nw_src & src_mask)) return false;
    const std::uint32_t dst_mask = prefix_mask(wc, w::kNwDstShift);
    if ((m.nw_dst & dst_mask) != (f.nw_dst & dst_mask)) return false;
    return true;
}

bool match_covers(const of::Match& wide, const of::Match& narrow) {
    namespace w = of::wildcard;
    const std::uint32_t ww = wide.wildcards;
    const std::uint32_t nw = narrow.wildcards;
    auto field = [&](std::uint32_t bit, bool equal) { return (ww & bit) || (!(nw & bit) && equal); };
    if (!field(w::kInPort, wide.in_port == narrow.in_port)) return false;
    if (!field(w::kDlVlan, wide.dl_vlan == narrow.dl_vlan)) return false;
    if (!field(w::kDlSrc, wide.dl_src == narrow.dl_src)) return false;
    if (!field(w::kDlDst, wide.dl_dst == narrow.dl_dst)) return false;
    if (!field(w::kDlType, wide.dl_type == narrow.dl_type)) return false;
    if (!field(w::kNwProto, wide.nw_proto == narrow.nw_proto)) return false;
    if (!field(w::kTpSrc, wide.tp_src == narrow.tp_src)) return false;
    if (!field(w::kTpDst, wide.tp_dst == narrow.tp_dst)) return false;
    if (!field(w::kDlVlanPcp, wide.dl_vlan_pcp == narrow.dl_vlan_pcp)) return false;
    if (!field(w::kNwTos, wide.nw_tos == narrow.nw_tos)) return false;
    const std::uint32_t wsrc = prefix_mask(ww, w::kNwSrcShift);
    const std::uint32_t nsrc = prefix_mask(nw, w::kNwSrcShift);
    if ((wsrc & ~nsrc) != 0 || (wide.nw_src & wsrc) != (narrow.nw_src & wsrc)) return false;
    const std::uint32_t wdst = prefix_mask(ww, w::kNwDstShift);
    const std::uint32_t ndst = prefix_mask(nw, w::kNwDstShift);
    if ((wdst & ~ndst) != 0 || (wide.nw_dst & wdst) != (narrow.nw_dst & wdst)) return false;
    return true;
}

FlowModResult FlowTable::apply(const of::FlowMod& fm, Clock::time_point now) {
    const of::Match match = of::normalized(fm.match);
    switch (fm.command) {
        case of::flow_command::kAdd: {
            if (!is_output_only(fm.actions)) return FlowModResult::UnsupportedAction;
            FlowEntry e{match, fm.priority, fm.idle_timeout, fm.hard_timeout, fm.cookie, fm.actions, now, now, 0, 0};
            auto same = std::find_if(entries_.begin(), entries_.end(), [&](const FlowEntry& x) {
                return x.priority == fm.priority && x.match == match;
            });
            if (same != entries_.end()) {
                e.seq = same->seq;
                *same = std::move(e);
                return FlowModResult::Applied;
            }
            e.seq = next_seq_++;
            auto pos = std::find_if(entries_.begin(), entries_.end(),
                                    [&](const FlowEntry& x) { return x.priority < fm.priority; });
            entries_.insert(pos, std::move(e));
            return FlowModResult::Applied;
        }
        case of::flow_command::kModify:
        case of::flow_command::kModifyStrict: {
            if (!is_output_only(fm.actions)) return FlowModResult::UnsupportedAction;
            const bool strict = fm.command == of::flow_command::kModifyStrict;
            bool any = false;
            for (auto& x : entries_) {
                const bool hit = strict ? (x.priority == fm.priority && x.match == match) : match_covers(match, x.match);
                if (hit) {
                    x.actions = fm.actions;
                    any = true;
                }
            }
            if (!any) {
                of::FlowMod add = fm;
                add.command = of::flow_command::kAdd;
                return apply(add, now);
            }
            return FlowModResult::Applied;
        }
        case of::flow_command::kDelete:
        case of::flow_command::kDeleteStrict: {
            const bool strict = fm.command == of::flow_command::kDeleteStrict;
            std::erase_if(entries_, [&](const FlowEntry& x) {
                const bool hit = strict ? (x.priority == fm.priority && x.match == match) : match_covers(match, x.match);
                if (!hit) return false;
                if (fm.out_port == of::port::kNone) return true;
                return std::any_of(x.actions.begin(), x.actions.end(), [&](const of::Action& a) {
                    const auto* o = std::get_if<of::OutputAction>(&a);
                    return o && o->port == fm.out_port;
                });
            });
            return FlowModResult::Applied;
        }
        default:
            return FlowModResult::UnsupportedCommand;
    }
}

const FlowEntry* FlowTable::lookup(const PacketFields& fields, Clock::time_point now) {
    expire(now);
    for (auto& e : entries_) {
        if (match_packet(e.match, fields)) {
            e.last_used = now;
            ++e.packets;
            return &e;
        }
    }
    return nullptr;
}

void FlowTable::expire(Clock::time_point now) {
    std::erase_if(entries_, [&](const FlowEntry& e) {
        if (e.idle_timeout && now - e.last_used >= std::chrono::seconds(e.idle_timeout)) return true;
        if (e.hard_timeout && now - e.installed >= std::chrono::seconds(e.hard_timeout)) return true;
        return false;
    });
}

}  // namespace zsdn::harness
