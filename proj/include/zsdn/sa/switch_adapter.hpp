#pragma once

// The SwitchAdapter: terminates one switch's OpenFlow connection and bridges
// it to the bus. To the switch it is the controller; on the bus it is a
// controllet of type 0x0000 whose instance id is the datapath id.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "zsdn/bus/session.hpp"
#include "zsdn/kernel/kernel.hpp"
#include "zsdn/of_stream.hpp"
#include "zsdn/ofcodec.hpp"
#include "zsdn/topic.hpp"

namespace zsdn::sa {

inline constexpr std::uint16_t kControlletType = topic::code::kSwitchAdapter;
inline constexpr std::chrono::milliseconds kHandshakeTimeout{10000};

/// Round robin over LB groups 0..groups-1 in arrival order.
class LbAssigner {
public:
    explicit LbAssigner(std::uint32_t groups);
    std::uint8_t next();
    std::uint64_t counter() const { return counter_; }
    std::uint32_t groups() const { return groups_; }

private:
    std::uint32_t groups_;
    std::uint64_t counter_ = 0;
};

struct Publication {
    topic::Topic topic;
    Bytes payload;
};

struct SaCounters {
    std::uint64_t packet_ins_published = 0;
    std::uint64_t port_status_published = 0;
    std::uint64_t unclassifiable_dropped = 0;
    std::uint64_t relayed = 0;
    std::uint64_t relay_dropped = 0;
    std::uint64_t ignored_from_switch = 0;
};

/// Per-switch state after the handshake. Pure logic; no I/O.
class SaSession {
public:
    SaSession(std::uint64_t dpid, std::vector<of::PortDesc> ports, std::uint32_t lb_groups);

    std::uint64_t dpid() const { return dpid_; }
    const std::vector<of::PortDesc>& ports() const { return ports_; }
    const LbAssigner& lb() const { return lb_; }
    const SaCounters& counters() const { return counters_; }

    /// The single TO pattern: TO | 0x0000 | dpid | OPENFLOW, all literal.
    topic::SubscriptionPattern to_pattern() const;
    static std::vector<topic::Topic> from_topics();

    /// Topic and payload (dpid | raw bytes) for a message from the switch,
    /// or nothing if the message is not published. PortStatus also updates
    /// the port list.
    std::optional<Publication> publish_switch_msg(const of::Message& msg, ByteView raw);
    /// Bytes to write to the switch, or nothing if the payload does not
    /// decode as a single OpenFlow message.
    std::optional<ByteView> relay_bus_event(const topic::Topic& topic, ByteView payload);
    /// PORTS (0x02) reply: count:u16 then port_no:u16 each. Other opcodes
    /// are rejected with status 1.
    bus::Reply answer_ports_request(ByteView payload) const;

private:
    std::uint64_t dpid_;
    std::vector<of::PortDesc> ports_;
    LbAssigner lb_;
    SaCounters counters_;
};

class HandshakeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct HandshakeResult {
    std::uint64_t dpid = 0;
    std::vector<of::PortDesc> ports;
};

/// Controller side of the OpenFlow handshake: Hello, FeaturesRequest,
/// FeaturesReply. Echo requests are answered meanwhile. Throws
/// HandshakeError on version mismatch, timeout, or disconnect.
HandshakeResult handshake(of::Connection& conn, std::chrono::milliseconds timeout = kHandshakeTimeout);

/// Decodes the PORTS reply payload.
std::vector<std::uint16_t> decode_ports_reply(ByteView payload);

struct SaConfig {
    net::Endpoint listen{"0.0.0.0", 6633};
    std::uint32_t lb_groups = 1;
    kernel::KernelConfig kernel;
    std::chrono::milliseconds handshake_timeout = kHandshakeTimeout;
};

/// Snapshot of the SA counters, readable from any thread.
struct SaStats {
    std::uint64_t dpid = 0;
    std::uint64_t packet_ins_published = 0;
    std::uint64_t port_status_published = 0;
    std::uint64_t unclassifiable_dropped = 0;
    std::uint64_t relayed = 0;
    std::uint64_t relay_dropped = 0;
    std::uint64_t dropped_not_active = 0;
};

class SwitchAdapter {
public:
    /// Binds the OpenFlow listener immediately.
    explicit SwitchAdapter(SaConfig config);
    ~SwitchAdapter();

    std::uint16_t port() const;
    /// Accepts one switch, performs the handshake, then bridges until the
    /// switch disconnects or stop()/kill() is called. Throws HandshakeError.
    void run();
    /// Graceful: BYE to the broker, switch connection closed. Thread-safe.
    void stop();
    /// As if the process died: no BYE. Thread-safe.
    void kill();

    SaStats stats() const;
    /// Kernel state, or Init before the switch connected.
    kernel::LifecycleState state() const;
    bool wait_active(std::chrono::milliseconds timeout) const;

private:
    class Bridge;

    SaConfig config_;
    net::Fd listener_;
    net::Waker waker_;
    std::atomic<bool> stopping_{false};
    std::atomic<bool> killing_{false};
    mutable std::mutex mutex_;
    std::unique_ptr<Bridge> bridge_;
    kernel::Kernel* kernel_ = nullptr;
};

}  // namespace zsdn::sa
