#pragma once

// Broker state machine. Every function here is a pure transition over
// BrokerState; the I/O runtime in broker.hpp only moves bytes.

#include <chrono>
#include <cstdint>
#include <map>
#include <vector>

#include "zsdn/bus/frame.hpp"
#include "zsdn/topic.hpp"

namespace zsdn::bus {

using ConnId = std::uint64_t;
using Clock = std::chrono::steady_clock;
using TimePoint = Clock::time_point;

/// System topics published by the broker: FROM | 0xFFFF | code.
namespace lifecycle {
inline constexpr std::uint16_t kKernelType = 0xFFFF;
inline constexpr std::uint8_t kJoin = 0x01;
inline constexpr std::uint8_t kLeave = 0x02;

topic::Topic topic_for(std::uint8_t code);
/// Pattern matching both JOIN and LEAVE.
topic::SubscriptionPattern any_pattern();

struct Member {
    std::uint16_t controllet_type = 0;
    std::uint64_t instance_id = 0;
    friend bool operator==(const Member&, const Member&) = default;
    friend auto operator<=>(const Member&, const Member&) = default;
};

Bytes encode_member(const Member& m);
/// Throws ProtocolError unless the payload is exactly 10 bytes.
Member decode_member(ByteView payload);

/// LIST reply: count:u16 then (type:u16 id:u64) per member.
Bytes encode_members(const std::vector<Member>& members);
std::vector<Member> decode_members(ByteView payload);
}  // namespace lifecycle

struct ControlletDescriptor {
    std::uint16_t controllet_type = 0;
    std::uint64_t instance_id = 0;
    std::vector<topic::SubscriptionPattern> to_patterns;
    std::vector<topic::Topic> from_topics;
    TimePoint last_heartbeat{};
    ConnId conn = 0;
};

struct PendingRequest {
    ConnId origin = 0;
    std::uint32_t origin_req_id = 0;
    ConnId target = 0;
};

using SubscriptionMap = std::map<ConnId, std::vector<topic::SubscriptionPattern>>;

struct BrokerState {
    std::map<std::uint64_t, ControlletDescriptor> registrations;
    std::map<ConnId, std::uint64_t> conn_ids;
    SubscriptionMap subscriptions;
    std::map<std::uint32_t, PendingRequest> pending;
    std::uint32_t next_request_id = 1;
};

struct Outbound {
    ConnId conn = 0;
    Frame frame;
    friend bool operator==(const Outbound&, const Outbound&) = default;
};

struct Transition {
    std::vector<Outbound> out;
    /// Connections the runtime must close after flushing `out`.
    std::vector<ConnId> close;
};

/// Connections holding at least one matching pattern, ascending, each once.
std::vector<ConnId> route(const SubscriptionMap& subscriptions, ByteView topic);
void route_into(const SubscriptionMap& subscriptions, ByteView topic, std::vector<ConnId>& out);

Transition broker_handle(BrokerState& state, ConnId conn, const Frame& frame, TimePoint now);

/// Connection closed by the peer or the runtime. Idempotent.
Transition broker_disconnect(BrokerState& state, ConnId conn);

/// Drops every registration silent for longer than `dead_after`, ascending
/// by instance id, exactly as if each had sent BYE.
Transition liveness_sweep(BrokerState& state, TimePoint now,
                          std::chrono::milliseconds dead_after = timing::kDeadAfter);

std::vector<lifecycle::Member> members_of(const BrokerState& state);

}  // namespace zsdn::bus
