#pragma once

// Cbench-style throughput benchmark: N emulated switches fire PACKET_INs at
// their SAs while R learning-switch replicas share the load via LB groups.

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace zsdn::harness {

struct BenchOptions {
    std::uint32_t switches = 16;
    std::uint32_t replicas = 1;
    std::chrono::milliseconds duration{10000};
    /// Keep `window` PACKET_INs in flight per switch instead of waiting for
    /// each response.
    bool open_loop = false;
    std::uint32_t window = 128;
    /// Closed loop only: send exactly this many per switch, ignoring duration.
    std::optional<std::uint64_t> packet_ins_per_switch;
    /// Adds a replica subscribed with a wildcarded LB byte.
    bool wildcard_observer = false;
    std::uint64_t seed = 1;
};

struct BenchReport {
    std::uint32_t switches = 0;
    std::uint32_t replicas = 0;
    bool open_loop = false;
    double duration_s = 0;
    std::uint64_t packet_ins_sent = 0;
    /// FLOW_MODs and PACKET_OUTs received by the switches.
    std::uint64_t responses = 0;
    double responses_per_s = 0;
    std::vector<std::uint64_t> per_replica;
    std::optional<std::uint64_t> observer;
    /// PACKET_INs published by all SAs.
    std::uint64_t published = 0;
    /// PACKET_INs handled across the LB replicas.
    std::uint64_t delivered = 0;
    bool conservation = false;
};

/// Throws std::runtime_error if no response arrives at all.
BenchReport run_bench(const BenchOptions& options);

/// Structured text, one "key: value" per line.
std::string format_report(const BenchReport& report);

}  // namespace zsdn::harness
