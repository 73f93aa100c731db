#pragma once

// Wiring between mock switches and hosts.

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "zsdn/harness/mock_switch.hpp"

namespace zsdn::harness {

struct HostSpec {
    std::string name;
    MacAddr mac{};
    std::uint64_t dpid = 0;
    std::uint16_t port = 0;
};

struct Received {
    MacAddr src{};
    MacAddr dst{};
    std::uint16_t ethertype = 0;
};

class Fabric {
public:
    Fabric();
    ~Fabric();

    MockSwitch& add_switch(std::uint64_t dpid, std::vector<std::uint16_t> ports);
    void add_link(std::uint64_t a, std::uint16_t pa, std::uint64_t b, std::uint16_t pb);
    void add_host(HostSpec host);

    MockSwitch& at(std::uint64_t dpid);
    const HostSpec& host(const std::string& name) const;
    bool has_switch(std::uint64_t dpid) const { return switches_.contains(dpid); }

    /// Host `from` transmits a UDP frame addressed to host `to`.
    void send(const std::string& from, const std::string& to);
    /// Host `from` transmits an arbitrary frame.
    void send_frame(const std::string& from, Bytes frame);

    /// Frames delivered to `host` so far, in arrival order.
    std::vector<Received> received(const std::string& host) const;
    /// Frames emitted on ports that lead nowhere.
    std::uint64_t dropped() const { return dropped_.load(); }

    /// True once no frame is queued and no PACKET_IN awaits its response,
    /// stable for `settle`.
    bool wait_quiescent(std::chrono::milliseconds timeout,
                        std::chrono::milliseconds settle = std::chrono::milliseconds(50));

    void stop();

private:
    struct Peer {
        bool is_host = false;
        std::uint64_t dpid = 0;
        std::uint16_t port = 0;
        std::string host;
    };

    void deliver(std::uint64_t dpid, std::uint16_t port, Bytes frame);

    std::shared_ptr<Activity> activity_;
    std::map<std::uint64_t, std::unique_ptr<MockSwitch>> switches_;
    std::map<std::pair<std::uint64_t, std::uint16_t>, Peer> wiring_;
    std::map<std::string, HostSpec> hosts_;
    mutable std::mutex rx_mutex_;
    std::map<std::string, std::vector<Received>> rx_;
    std::atomic<std::uint64_t> dropped_{0};
};

}  // namespace zsdn::harness
