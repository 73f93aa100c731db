#pragma once

// The controllet micro-kernel: connection and registration with the bus,
// peer discovery, dependency gating, lifecycle, heartbeats. Controllet
// logic plugs in through the Controllet callbacks, which the kernel invokes
// serially from the thread that calls run().

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <functional>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "zsdn/bus/session.hpp"
#include "zsdn/kernel/lifecycle.hpp"
#include "zsdn/kernel/registry.hpp"

namespace zsdn::kernel {

class Kernel;

class Controllet {
public:
    virtual ~Controllet() = default;
    virtual void on_lifecycle(Kernel&, LifecycleState) {}
    virtual void on_event(Kernel&, const topic::Topic&, ByteView /*payload*/) {}
    virtual bus::Reply on_request(Kernel&, std::uint64_t /*origin*/, ByteView /*payload*/) {
        return bus::Reply{bus::status::kRejected, {}};
    }
    virtual void on_member(Kernel&, const Member&, bool /*joined*/) {}
    /// Called every KernelConfig::tick_period while ACTIVE.
    virtual void on_tick(Kernel&) {}
    /// End of every event-loop turn, after inbound work was dispatched.
    virtual void on_turn_end(Kernel&) {}
};

struct KernelConfig {
    std::string name = "controllet";
    net::Endpoint bus{"127.0.0.1", 7633};
    std::uint16_t controllet_type = 0;
    std::uint64_t instance_id = 0;
    /// Declared TO set; the kernel additionally subscribes to lifecycle events.
    std::vector<topic::SubscriptionPattern> to_patterns;
    std::vector<topic::Topic> from_topics;
    DependencySpec deps;
    bus::SessionOptions session;
    std::chrono::milliseconds tick_period{0};
    std::chrono::milliseconds backoff_min{500};
    std::chrono::milliseconds backoff_max{8000};
    double backoff_jitter = 0.2;
    std::uint64_t seed = 0;
};

/// Random non-zero instance id.
std::uint64_t random_instance_id();

/// Reconnect delay for the given attempt (0-based): min * 2^attempt capped at
/// max, scaled by a factor drawn uniformly from [1 - jitter, 1 + jitter].
std::chrono::milliseconds backoff_delay(const KernelConfig& config, unsigned attempt, std::mt19937_64& rng);

class Kernel {
public:
    Kernel(KernelConfig config, Controllet& controllet);
    Kernel(const Kernel&) = delete;
    Kernel& operator=(const Kernel&) = delete;

    /// Runs the event loop until stop() or kill().
    void run();
    /// Graceful: BYE to the broker, then STOPPED. Thread-safe.
    void stop();
    /// Abrupt: the connection is dropped without BYE, as if the process died. Thread-safe.
    void kill();

    LifecycleState state() const { return state_.load(); }
    bool wait_for_state(LifecycleState wanted, std::chrono::milliseconds timeout) const;

    std::uint64_t instance_id() const { return config_.instance_id; }
    const KernelConfig& config() const { return config_; }
    const RegistryView& registry() const { return registry_; }

    /// Throws std::logic_error unless ACTIVE.
    void publish(const topic::Topic& topic, ByteView payload);
    bus::Reply request(std::uint64_t target, ByteView payload,
                       std::optional<std::chrono::milliseconds> timeout = {});
    void subscribe(const topic::SubscriptionPattern& pattern);

    /// Services `fd` from the event loop; the callback runs when it is readable.
    void watch(int fd, std::function<void()> on_readable);
    void unwatch(int fd);

private:
    struct Watch {
        int fd;
        std::function<void()> on_readable;
    };

    void transition(LifecycleEvent event, bool deps_ok = true);
    bool connect_and_register();
    void serve();
    void dispatch(bus::Inbound item);
    void handle_lifecycle(const topic::Topic& topic, ByteView payload);
    void sleep_interruptible(std::chrono::milliseconds d);

    KernelConfig config_;
    Controllet& controllet_;
    std::optional<bus::Session> session_;
    RegistryView registry_;
    std::vector<topic::SubscriptionPattern> extra_subscriptions_;
    std::vector<Watch> watches_;
    net::Waker waker_;
    std::mt19937_64 rng_;
    std::atomic<LifecycleState> state_{LifecycleState::Init};
    std::atomic<bool> stop_requested_{false};
    std::atomic<bool> kill_requested_{false};
    mutable std::mutex state_mutex_;
    mutable std::condition_variable state_cv_;
    std::chrono::steady_clock::time_point next_tick_{};
};

}  // namespace zsdn::kernel
