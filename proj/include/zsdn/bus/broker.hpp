#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>

#include "zsdn/bus/broker_core.hpp"
#include "zsdn/net.hpp"

namespace zsdn::bus {

struct BrokerOptions {
    net::Endpoint listen{"127.0.0.1", 7633};
    std::chrono::milliseconds sweep_interval{1000};
    std::chrono::milliseconds dead_after = timing::kDeadAfter;
    /// Events to a connection whose unsent backlog exceeds this are dropped.
    std::size_t max_backlog = 64u * 1024u * 1024u;
};

struct BrokerStats {
    std::uint64_t frames_in = 0;
    std::uint64_t frames_out = 0;
    std::uint64_t dropped_backlog = 0;
    std::uint64_t connections = 0;
};

/// Single-threaded epoll runtime around broker_handle. Binds in the
/// constructor so port() is valid before run().
class Broker {
public:
    explicit Broker(BrokerOptions options);
    ~Broker();
    Broker(const Broker&) = delete;
    Broker& operator=(const Broker&) = delete;

    std::uint16_t port() const { return port_; }
    net::Endpoint endpoint() const { return {options_.listen.host == "0.0.0.0" ? "127.0.0.1" : options_.listen.host, port_}; }

    void run();
    /// Thread-safe; run() returns after closing every connection.
    void stop();

    BrokerStats stats() const;

private:
    struct Impl;
    BrokerOptions options_;
    std::uint16_t port_ = 0;
    std::unique_ptr<Impl> impl_;
};

}  // namespace zsdn::bus
