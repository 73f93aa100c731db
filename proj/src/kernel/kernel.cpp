#include "zsdn/kernel/kernel.hpp"

#include <poll.h>

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

namespace zsdn::kernel {

using std::chrono::milliseconds;
using SteadyClock = std::chrono::steady_clock;

namespace {
constexpr std::size_t kMaxDispatchPerTurn = 4096;
}

std::uint64_t random_instance_id() {
    std::random_device rd;
    std::uint64_t id = 0;
    while (id == 0) id = (static_cast<std::uint64_t>(rd()) << 32) | rd();
    return id;
}

milliseconds backoff_delay(const KernelConfig& config, unsigned attempt, std::mt19937_64& rng) {
    double base = static_cast<double>(config.backoff_min.count()) * std::pow(2.0, std::min(attempt, 16u));
    base = std::min(base, static_cast<double>(config.backoff_max.count()));
    std::uniform_real_distribution<double> jitter(1.0 - config.backoff_jitter, 1.0 + config.backoff_jitter);
    return milliseconds(static_cast<std::int64_t>(base * jitter(rng)));
}

Kernel::Kernel(KernelConfig config, Controllet& controllet)
    : config_(std::move(config)), controllet_(controllet), rng_(config_.seed ? config_.seed : random_instance_id()) {
    if (config_.instance_id == 0) config_.instance_id = random_instance_id();
}

bool Kernel::wait_for_state(LifecycleState wanted, milliseconds timeout) const {
    std::unique_lock lock(state_mutex_);
    return state_cv_.wait_for(lock, timeout, [&] { return state_.load() == wanted; });
}

void Kernel::transition(LifecycleEvent event, bool deps_ok) {
    const LifecycleState before = state_.load();
    const LifecycleState after = lifecycle_step(before, event, deps_ok);
    if (event == LifecycleEvent::DepLost && before == LifecycleState::Active) {
        spdlog::warn("{}: dependency lost while ACTIVE; staying ACTIVE", config_.name);
    }
    {
        std::lock_guard lock(state_mutex_);
        state_ = after;
    }
    state_cv_.notify_all();
    if (after != before) {
        spdlog::debug("{}: {} -> {}", config_.name, to_string(before), to_string(after));
        if (after == LifecycleState::Active) next_tick_ = SteadyClock::now();
        controllet_.on_lifecycle(*this, after);
    }
}

void Kernel::stop() {
    stop_requested_ = true;
    waker_.notify();
}

void Kernel::kill() {
    kill_requested_ = true;
    waker_.notify();
}

void Kernel::publish(const topic::Topic& topic, ByteView payload) {
    if (state_.load() != LifecycleState::Active) {
        throw std::logic_error(config_.name + ": publish before ACTIVE");
    }
    session_->publish(topic, payload);
}

bus::Reply Kernel::request(std::uint64_t target, ByteView payload, std::optional<milliseconds> timeout) {
    if (!session_ || !session_->registered()) throw bus::SessionError(config_.name + ": not registered");
    return session_->request(target, payload, timeout);
}

void Kernel::subscribe(const topic::SubscriptionPattern& pattern) {
    extra_subscriptions_.push_back(pattern);
    if (session_ && session_->registered()) session_->subscribe(pattern);
}

void Kernel::watch(int fd, std::function<void()> on_readable) {
    unwatch(fd);
    watches_.push_back(Watch{fd, std::move(on_readable)});
}

void Kernel::unwatch(int fd) {
    std::erase_if(watches_, [fd](const Watch& w) { return w.fd == fd; });
}

void Kernel::sleep_interruptible(milliseconds d) {
    pollfd p{waker_.fd(), POLLIN, 0};
    ::poll(&p, 1, static_cast<int>(d.count()));
    waker_.drain();
}

bool Kernel::connect_and_register() {
    session_.reset();
    session_.emplace(bus::Session::connect(config_.bus, config_.session));
    transition(LifecycleEvent::Connected);

    bus::RegisterBody body;
    body.controllet_type = config_.controllet_type;
    body.instance_id = config_.instance_id;
    body.to_patterns = config_.to_patterns;
    body.from_topics = config_.from_topics;
    const std::uint8_t status = session_->register_controllet(body);
    if (status != bus::status::kOk) {
        spdlog::warn("{}: registration of {:016x} rejected (status {})", config_.name, config_.instance_id, status);
        session_->bye();
        session_.reset();
        return false;
    }
    // Lifecycle events are kernel-internal, not part of the declared TO set.
    session_->subscribe(bus::lifecycle::any_pattern());
    for (const auto& p : extra_subscriptions_) session_->subscribe(p);
    // LIST reply is ordered after any lifecycle event the broker emitted
    // before it, so replacing the view here is consistent.
    registry_ = registry_query(*session_);
    transition(LifecycleEvent::RegisterAcked, deps_satisfied(registry_, config_.deps));
    return true;
}

void Kernel::handle_lifecycle(const topic::Topic& topic, ByteView payload) {
    Member m;
    try {
        m = bus::lifecycle::decode_member(payload);
    } catch (const bus::ProtocolError& e) {
        spdlog::warn("{}: bad lifecycle event: {}", config_.name, e.what());
        return;
    }
    const bool joined = topic[3] == bus::lifecycle::kJoin;
    const bool was_ok = deps_satisfied(registry_, config_.deps);
    if (joined) {
        registry_.join(m);
    } else {
        registry_.leave(m.instance_id);
    }
    const bool now_ok = deps_satisfied(registry_, config_.deps);
    const LifecycleState s = state_.load();
    if (s == LifecycleState::WaitingDeps && now_ok) {
        transition(LifecycleEvent::DepSatisfied);
    } else if (s == LifecycleState::Active && was_ok && !now_ok) {
        transition(LifecycleEvent::DepLost);
    }
    controllet_.on_member(*this, m, joined);
}

void Kernel::dispatch(bus::Inbound item) {
    if (auto* ev = std::get_if<bus::Event>(&item)) {
        const auto lifecycle_pattern = bus::lifecycle::any_pattern();
        if (ev->topic.size() == 4 && topic::matches(lifecycle_pattern, ev->topic)) {
            handle_lifecycle(ev->topic, ev->payload);
            return;
        }
        if (state_.load() != LifecycleState::Active) return;
        controllet_.on_event(*this, ev->topic, ev->payload);
        return;
    }
    auto& req = std::get<bus::IncomingRequest>(item);
    bus::Reply reply{bus::status::kRejected, {}};
    if (state_.load() == LifecycleState::Active) reply = controllet_.on_request(*this, req.origin, req.payload);
    session_->reply(req, reply.status, reply.payload);
}

void Kernel::serve() {
    std::vector<pollfd> fds;
    while (!stop_requested_ && !kill_requested_) {
        const auto now = SteadyClock::now();
        auto wake_at = session_->next_heartbeat();
        const bool ticking = config_.tick_period.count() > 0 && state_.load() == LifecycleState::Active;
        if (ticking) wake_at = std::min(wake_at, next_tick_);
        auto wait = std::max<std::int64_t>(0, std::chrono::duration_cast<milliseconds>(wake_at - now).count());
        if (session_->has_inbound()) wait = 0;

        session_->flush();
        fds.clear();
        fds.push_back(pollfd{session_->fd(), POLLIN, 0});
        fds.push_back(pollfd{waker_.fd(), POLLIN, 0});
        for (const auto& w : watches_) fds.push_back(pollfd{w.fd, POLLIN, 0});
        const int rc = ::poll(fds.data(), fds.size(), static_cast<int>(wait));
        if (rc < 0 && errno != EINTR) throw bus::SessionError("poll failed");

        if (fds[1].revents) waker_.drain();
        if (stop_requested_ || kill_requested_) break;

        if (fds[0].revents || session_->has_inbound()) {
            for (std::size_t i = 0; i < kMaxDispatchPerTurn; ++i) {
                auto item = session_->next_event(milliseconds(0));
                if (!item) break;
                try {
                    dispatch(std::move(*item));
                } catch (const bus::RequestTimeout& e) {
                    spdlog::warn("{}: {}", config_.name, e.what());
                }
            }
        }
        // Callbacks may unwatch; copy the ready list first.
        std::vector<std::function<void()>> ready;
        for (std::size_t i = 2; i < fds.size(); ++i) {
            if (fds[i].revents) {
                for (const auto& w : watches_) {
                    if (w.fd == fds[i].fd) ready.push_back(w.on_readable);
                }
            }
        }
        for (auto& cb : ready) cb();

        if (ticking && SteadyClock::now() >= next_tick_) {
            next_tick_ = SteadyClock::now() + config_.tick_period;
            try {
                controllet_.on_tick(*this);
            } catch (const bus::RequestTimeout& e) {
                spdlog::warn("{}: {}", config_.name, e.what());
            }
        }
        controllet_.on_turn_end(*this);
        session_->heartbeat_if_due();
    }
}

void Kernel::run() {
    unsigned attempt = 0;
    while (!stop_requested_ && !kill_requested_) {
        try {
            if (!session_ || !session_->registered()) {
                if (!connect_and_register()) {
                    sleep_interruptible(backoff_delay(config_, attempt++, rng_));
                    continue;
                }
                attempt = 0;
            }
            serve();
        } catch (const bus::SessionError& e) {
            spdlog::warn("{}: broker lost: {}", config_.name, e.what());
            session_.reset();
            transition(LifecycleEvent::BrokerLost);
            sleep_interruptible(backoff_delay(config_, attempt++, rng_));
        } catch (const bus::RequestTimeout& e) {
            spdlog::warn("{}: {}", config_.name, e.what());
            session_.reset();
            transition(LifecycleEvent::BrokerLost);
            sleep_interruptible(backoff_delay(config_, attempt++, rng_));
        } catch (const DiscoveryError& e) {
            spdlog::warn("{}: {}", config_.name, e.what());
            session_.reset();
            transition(LifecycleEvent::BrokerLost);
            sleep_interruptible(backoff_delay(config_, attempt++, rng_));
        }
    }
    if (session_) {
        if (kill_requested_) {
            session_->abort();
        } else {
            session_->bye();
        }
        session_.reset();
    }
    transition(LifecycleEvent::Shutdown);
}

}  // namespace zsdn::kernel
