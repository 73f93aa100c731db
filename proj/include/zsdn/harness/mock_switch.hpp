#pragma once

// A software OpenFlow 1.0 switch for tests, scenarios and benchmarks.

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <set>
#include <thread>
#include <vector>

#include "zsdn/harness/flow_table.hpp"
#include "zsdn/of_stream.hpp"

namespace zsdn::harness {

struct Emission {
    std::uint16_t port = 0;
    Bytes frame;
    friend bool operator==(const Emission&, const Emission&) = default;
};

struct CoreOutput {
    std::vector<Emission> emitted;
    std::vector<of::Message> to_controller;
};

struct SwitchCounters {
    std::uint64_t frames_in = 0;
    std::uint64_t packet_ins = 0;
    std::uint64_t lldp_packet_ins = 0;
    std::uint64_t forwarded = 0;
    std::uint64_t flow_mods = 0;
    std::uint64_t packet_outs = 0;
    std::uint64_t drops = 0;
    std::uint64_t errors = 0;
};

/// Switch data and control plane logic without I/O.
class SwitchCore {
public:
    SwitchCore(std::uint64_t dpid, std::vector<std::uint16_t> ports);

    std::uint64_t dpid() const { return dpid_; }
    const std::vector<std::uint16_t>& ports() const { return ports_; }
    of::FeaturesReply features(std::uint32_t xid) const;

    /// A frame arriving on `in_port` from the data plane.
    CoreOutput receive_frame(std::uint16_t in_port, ByteView frame, Clock::time_point now);
    /// A message from the controller.
    CoreOutput handle_controller(const of::Message& msg, Clock::time_point now);

    const FlowTable& flows() const { return table_; }
    const SwitchCounters& counters() const { return counters_; }

private:
    void execute(const std::vector<of::Action>& actions, std::uint16_t in_port, ByteView frame, CoreOutput& out);

    std::uint64_t dpid_;
    std::vector<std::uint16_t> ports_;
    FlowTable table_;
    SwitchCounters counters_;
    std::uint32_t next_xid_ = 0x80000000u;
};

/// Switch side of the OpenFlow handshake.
void switch_handshake(of::Connection& conn, const SwitchCore& core, std::chrono::milliseconds timeout);

/// Shared accounting used to detect when traffic has settled.
struct Activity {
    /// Frames queued at switches but not yet processed.
    std::atomic<std::int64_t> queued{0};
    /// Non-LLDP PACKET_INs without a controller response carrying their xid.
    std::atomic<std::int64_t> outstanding{0};
    std::atomic<std::uint64_t> generation{0};
};

struct FlowSummary {
    std::uint16_t priority = 0;
    of::Match match;
    std::vector<of::Action> actions;
    std::uint16_t idle_timeout = 0;
    friend bool operator==(const FlowSummary&, const FlowSummary&) = default;
};

/// SwitchCore on its own thread behind a real OpenFlow connection.
class MockSwitch {
public:
    using FrameSink = std::function<void(std::uint64_t dpid, std::uint16_t port, Bytes frame)>;

    MockSwitch(std::uint64_t dpid, std::vector<std::uint16_t> ports, FrameSink sink = {},
               std::shared_ptr<Activity> activity = nullptr);
    ~MockSwitch();
    MockSwitch(const MockSwitch&) = delete;
    MockSwitch& operator=(const MockSwitch&) = delete;

    /// Connects and completes the handshake, then starts the switch thread.
    void connect(const net::Endpoint& controller, std::chrono::milliseconds timeout = std::chrono::seconds(10));
    /// Queues a frame as if it arrived on `in_port`. Thread-safe.
    void inject(std::uint16_t in_port, Bytes frame);
    void stop();

    std::uint64_t dpid() const { return dpid_; }
    bool connected() const { return connected_.load(); }
    SwitchCounters counters() const;
    std::vector<FlowSummary> flows() const;

private:
    void loop();
    /// Queues controller-bound messages; returns the data plane emissions.
    /// Caller holds mutex_.
    std::vector<Emission> apply(CoreOutput out);
    /// Hands emissions to the sink; called without mutex_ held.
    void emit(std::vector<Emission> emitted);
    void on_controller(ByteView raw);

    std::uint64_t dpid_;
    FrameSink sink_;
    std::shared_ptr<Activity> activity_;
    mutable std::mutex mutex_;
    SwitchCore core_;
    std::deque<std::pair<std::uint16_t, Bytes>> inbox_;
    std::set<std::uint32_t> pending_xids_;
    of::Connection conn_;
    net::Waker waker_;
    std::atomic<bool> stopping_{false};
    std::atomic<bool> connected_{false};
    std::thread thread_;
};

}  // namespace zsdn::harness
