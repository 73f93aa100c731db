#pragma once

// L2 learning switch controllet. Learns source MACs from PACKET_INs, floods
// unknown destinations, and installs dl_dst flows for known ones.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "zsdn/kernel/kernel.hpp"
#include "zsdn/ofcodec.hpp"
#include "zsdn/topic.hpp"

namespace zsdn::apps {

inline constexpr std::uint16_t kLearningSwitchType = 0x0001;
inline constexpr std::chrono::seconds kMacAgeOut{300};
inline constexpr std::uint16_t kFlowPriority = 100;
inline constexpr std::uint16_t kFlowIdleTimeout = 60;

class MacTable {
public:
    using Clock = std::chrono::steady_clock;

    explicit MacTable(Clock::duration age_out = kMacAgeOut) : age_out_(age_out) {}

    void learn(std::uint64_t dpid, const MacAddr& mac, std::uint16_t port, Clock::time_point now);
    /// Port for a live entry; entries older than the age-out are ignored.
    std::optional<std::uint16_t> lookup(std::uint64_t dpid, const MacAddr& mac, Clock::time_point now) const;
    std::size_t size() const { return entries_.size(); }
    /// Drops entries past their age-out.
    void expire(Clock::time_point now);

    friend bool operator==(const MacTable& a, const MacTable& b) { return a.entries_ == b.entries_; }

private:
    struct Entry {
        std::uint16_t port;
        Clock::time_point learned_at;
        friend bool operator==(const Entry&, const Entry&) = default;
    };
    Clock::duration age_out_;
    std::map<std::pair<std::uint64_t, MacAddr>, Entry> entries_;
};

/// One PACKET_IN through the learning logic. Returns the messages to send
/// to switch `dpid`, in order. Responses reuse the PACKET_IN xid.
std::vector<of::Message> learning_step(MacTable& table, std::uint64_t dpid, const of::PacketIn& packet_in,
                                       MacTable::Clock::time_point now = MacTable::Clock::now());

/// PACKET_IN subscription for one LB group, or every group when empty.
topic::SubscriptionPattern packet_in_pattern(std::optional<std::uint8_t> lb_group);

struct LearningSwitchStats {
    std::uint64_t packet_ins = 0;
    std::uint64_t flow_mods = 0;
    std::uint64_t packet_outs = 0;
    std::uint64_t malformed = 0;
};

class LearningSwitch : public kernel::Controllet {
public:
    void on_event(kernel::Kernel& k, const topic::Topic& topic, ByteView payload) override;
    void on_turn_end(kernel::Kernel& k) override;

    LearningSwitchStats stats() const;
    std::uint64_t packet_ins() const { return packet_ins_.load(); }

    /// Kernel configuration for a replica bound to `lb_group` (wildcard when empty).
    static kernel::KernelConfig config(kernel::KernelConfig base, std::optional<std::uint8_t> lb_group);

private:
    MacTable table_;
    std::atomic<std::uint64_t> packet_ins_{0};
    std::atomic<std::uint64_t> flow_mods_{0};
    std::atomic<std::uint64_t> packet_outs_{0};
    std::atomic<std::uint64_t> malformed_{0};
    MacTable::Clock::time_point next_expiry_{};
};

}  // namespace zsdn::apps
