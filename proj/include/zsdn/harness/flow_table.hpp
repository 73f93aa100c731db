#pragma once

// OpenFlow 1.0 single-table semantics for the mock switch.

#include <chrono>
#include <cstdint>
#include <optional>
#include <vector>

#include "zsdn/ofcodec.hpp"

namespace zsdn::harness {

using Clock = std::chrono::steady_clock;

/// Header fields of a frame as seen by an OpenFlow 1.0 match.
struct PacketFields {
    std::uint16_t in_port = 0;
    MacAddr dl_src{};
    MacAddr dl_dst{};
    std::uint16_t dl_vlan = 0xFFFF;
    std::uint8_t dl_vlan_pcp = 0;
    std::uint16_t dl_type = 0;
    std::uint8_t nw_tos = 0;
    std::uint8_t nw_proto = 0;
    std::uint32_t nw_src = 0;
    std::uint32_t nw_dst = 0;
    std::uint16_t tp_src = 0;
    std::uint16_t tp_dst = 0;
};

/// Returns nothing for frames shorter than an Ethernet header.
std::optional<PacketFields> extract_fields(std::uint16_t in_port, ByteView frame);
bool match_packet(const of::Match& match, const PacketFields& fields);
/// True when every packet matched by `narrow` is matched by `wide`.
bool match_covers(const of::Match& wide, const of::Match& narrow);

struct FlowEntry {
    of::Match match;
    std::uint16_t priority = 0;
    std::uint16_t idle_timeout = 0;
    std::uint16_t hard_timeout = 0;
    std::uint64_t cookie = 0;
    std::vector<of::Action> actions;
    Clock::time_point installed{};
    Clock::time_point last_used{};
    std::uint64_t packets = 0;
    std::uint64_t seq = 0;
};

enum class FlowModResult { Applied, UnsupportedAction, UnsupportedCommand };

class FlowTable {
public:
    FlowModResult apply(const of::FlowMod& fm, Clock::time_point now);
    /// Highest priority match, insertion order breaking ties. Refreshes the
    /// entry's idle timer.
    const FlowEntry* lookup(const PacketFields& fields, Clock::time_point now);
    void expire(Clock::time_point now);

    /// Entries in lookup order.
    const std::vector<FlowEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

private:
    std::vector<FlowEntry> entries_;
    std::uint64_t next_seq_ = 0;
};

}  // namespace zsdn::harness
