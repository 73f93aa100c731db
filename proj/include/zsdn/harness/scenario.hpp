#pragma once

// Declarative scenarios: a switch/host topology, the controllets to run, and
// a list of traffic and assertion steps. See scenarios/README.md for the
// file format.

#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "zsdn/bytes.hpp"

namespace zsdn::harness {

class ScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SwitchDecl {
    std::uint64_t dpid = 0;
    std::vector<std::uint16_t> ports;
};

struct LinkDecl {
    std::uint64_t a = 0;
    std::uint16_t pa = 0;
    std::uint64_t b = 0;
    std::uint16_t pb = 0;
    friend bool operator==(const LinkDecl&, const LinkDecl&) = default;
};

struct HostDecl {
    std::string name;
    MacAddr mac{};
    std::uint64_t dpid = 0;
    std::uint16_t port = 0;
};

struct ControlletDecl {
    std::uint32_t learning_replicas = 0;
    bool learning_wildcard = false;
    bool topology = false;
    std::chrono::milliseconds lldp_period{1000};
};

namespace step {
struct Send {
    std::string from;
    std::string to;
    std::uint32_t count = 1;
};
struct Sleep {
    std::chrono::milliseconds duration{0};
};
/// Cumulative non-LLDP PACKET_INs raised by a switch.
struct ExpectPacketIns {
    std::uint64_t dpid = 0;
    std::uint64_t count = 0;
};
/// Cumulative frames delivered to `host`, optionally only those from `from`.
struct ExpectReceived {
    std::string host;
    std::optional<std::string> from;
    std::uint64_t count = 0;
};
struct FlowDecl {
    std::string dl_dst;
    std::uint16_t out_port = 0;
    friend bool operator==(const FlowDecl&, const FlowDecl&) = default;
};
/// Exact flow table contents of a switch (dl_dst -> output port).
struct ExpectFlows {
    std::uint64_t dpid = 0;
    std::vector<FlowDecl> flows;
};
/// Waits up to `within` for the LINKS reply to equal `links` (or, when
/// `links` is absent, the declared switch-to-switch links).
struct ExpectLinks {
    std::optional<std::vector<LinkDecl>> links;
    std::chrono::milliseconds within{3000};
};
struct KillSa {
    std::uint64_t dpid = 0;
};
}  // namespace step

using Step = std::variant<step::Send, step::Sleep, step::ExpectPacketIns, step::ExpectReceived, step::ExpectFlows,
                          step::ExpectLinks, step::KillSa>;

struct Scenario {
    std::string name;
    std::uint64_t seed = 1;
    std::vector<SwitchDecl> switches;
    std::vector<LinkDecl> links;
    std::vector<HostDecl> hosts;
    ControlletDecl controllets;
    std::vector<Step> steps;
};

/// Parses and validates. Throws ScenarioError naming the offending entry,
/// including when the link graph contains a cycle.
Scenario load_scenario_text(const std::string& yaml);
Scenario load_scenario_file(const std::string& path);

struct ScenarioResult {
    bool passed = false;
    std::vector<std::string> transcript;
    std::chrono::milliseconds elapsed{0};
};

struct RunOptions {
    std::optional<std::uint64_t> seed;
    std::chrono::milliseconds settle_timeout{5000};
};

/// Boots broker, SAs, controllets and mock switches, runs the steps and tears
/// everything down.
ScenarioResult run_scenario(const Scenario& scenario, const RunOptions& options = {});

}  // namespace zsdn::harness
