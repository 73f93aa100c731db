#pragma once

// Topology controllet: periodic LLDP probes out of every switch port, a
// directed edge graph fed by the probes that come back as PACKET_INs, and
// link-up/link-down events plus a LINKS query over the bidirectional links.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <vector>

#include "zsdn/frame.hpp"
#include "zsdn/kernel/kernel.hpp"
#include "zsdn/ofcodec.hpp"
#include "zsdn/topic.hpp"

namespace zsdn::apps {

inline constexpr std::uint16_t kTopologyType = 0x0002;
inline constexpr std::uint8_t kLinkUp = 0x01;
inline constexpr std::uint8_t kLinkDown = 0x02;
inline constexpr std::chrono::milliseconds kLldpPeriod{1000};
/// An edge not refreshed for this many cycles is removed.
inline constexpr std::uint64_t kMissedCyclesAllowed = 3;

struct SwitchPort {
    std::uint64_t dpid = 0;
    std::uint16_t port = 0;
    friend bool operator==(const SwitchPort&, const SwitchPort&) = default;
    friend auto operator<=>(const SwitchPort&, const SwitchPort&) = default;
};

/// Bidirectional link in canonical order: a < b.
struct Link {
    SwitchPort a;
    SwitchPort b;
    static Link canonical(SwitchPort x, SwitchPort y);
    friend bool operator==(const Link&, const Link&) = default;
    friend auto operator<=>(const Link&, const Link&) = default;
};

/// dpidA:u64 portA:u16 dpidB:u64 portB:u16.
Bytes encode_link(const Link& link);
Link decode_link(ByteView bytes);
/// LINKS reply: count:u16 then one encoded link each.
Bytes encode_links(const std::vector<Link>& links);
std::vector<Link> decode_links(ByteView payload);

topic::Topic link_event_topic(std::uint8_t code);

class LinkGraph {
public:
    /// Records edge from -> to seen in `cycle`. Returns the link if it just
    /// became bidirectional.
    std::optional<Link> observe(SwitchPort from, SwitchPort to, std::uint64_t cycle);
    /// Removes edges last seen before cycle - kMissedCyclesAllowed; returns links that went down.
    std::vector<Link> expire(std::uint64_t cycle);
    std::vector<Link> remove_switch(std::uint64_t dpid);
    std::vector<Link> remove_port(SwitchPort sp);

    /// Bidirectional links, sorted.
    std::vector<Link> links() const { return {up_.begin(), up_.end()}; }
    std::size_t edge_count() const { return edges_.size(); }
    bool has_edge(SwitchPort from, SwitchPort to) const;

private:
    template <typename Pred>
    std::vector<Link> remove_edges(Pred pred);

    std::map<std::pair<SwitchPort, SwitchPort>, std::uint64_t> edges_;
    std::set<Link> up_;
};

/// One LLDP PACKET_OUT per port for switch `dpid`.
std::vector<of::PacketOut> lldp_probes(std::uint64_t dpid, const std::vector<std::uint16_t>& ports);

struct TopologyOptions {
    std::chrono::milliseconds lldp_period = kLldpPeriod;
};

class Topology : public kernel::Controllet {
public:
    explicit Topology(TopologyOptions options = {}) : options_(options) {}

    void on_event(kernel::Kernel& k, const topic::Topic& topic, ByteView payload) override;
    bus::Reply on_request(kernel::Kernel& k, std::uint64_t origin, ByteView payload) override;
    void on_member(kernel::Kernel& k, const kernel::Member& m, bool joined) override;
    void on_tick(kernel::Kernel& k) override;

    /// Thread-safe snapshot of the bidirectional links.
    std::vector<Link> links() const;
    std::uint64_t cycles() const { return cycle_.load(); }

    static kernel::KernelConfig config(kernel::KernelConfig base, const TopologyOptions& options);

private:
    void publish_changes(kernel::Kernel& k, const std::vector<Link>& down);
    void publish_link(kernel::Kernel& k, std::uint8_t code, const Link& link);

    TopologyOptions options_;
    LinkGraph graph_;
    std::atomic<std::uint64_t> cycle_{0};
    std::uint32_t next_xid_ = 1;
    mutable std::mutex snapshot_mutex_;
    std::vector<Link> snapshot_;
};

}  // namespace zsdn::apps
