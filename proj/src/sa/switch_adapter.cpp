#include <poll.h>

#include <thread>

#include <spdlog/spdlog.h>

#include "zsdn/sa/switch_adapter.hpp"

namespace zsdn::sa {

using std::chrono::milliseconds;
using SteadyClock = std::chrono::steady_clock;

HandshakeResult handshake(of::Connection& conn, milliseconds timeout) {
    const auto deadline = SteadyClock::now() + timeout;
    std::uint32_t xid = 1;
    try {
        conn.send(of::Hello{xid++, {}});
        bool hello_seen = false;
        std::uint32_t features_xid = 0;
        while (true) {
            const auto left = std::chrono::ceil<milliseconds>(deadline - SteadyClock::now());
            if (left.count() <= 0) throw HandshakeError("handshake timed out");
            auto raw = conn.receive(left);
            if (!raw) throw HandshakeError("handshake timed out");
            const of::Header h = of::decode_header(*raw);
            if (h.version != of::kVersion) {
                throw HandshakeError("version mismatch: peer speaks 0x" + to_hex(ByteView(&h.version, 1)));
            }
            const of::Message msg = of::decode(*raw);
            if (std::holds_alternative<of::Hello>(msg)) {
                if (!hello_seen) {
                    hello_seen = true;
                    features_xid = xid++;
                    conn.send(of::FeaturesRequest{features_xid});
                }
            } else if (const auto* echo = std::get_if<of::EchoRequest>(&msg)) {
                conn.send(of::EchoReply{echo->xid, echo->data});
            } else if (const auto* fr = std::get_if<of::FeaturesReply>(&msg)) {
                if (hello_seen) return HandshakeResult{fr->datapath_id, fr->ports};
            } else {
                spdlog::debug("handshake: ignoring {}", of::type_name(h.type));
            }
        }
    } catch (const net::NetError& e) {
        throw HandshakeError(std::string("switch disconnected during handshake: ") + e.what());
    } catch (const of::DecodeError& e) {
        throw HandshakeError(std::string("malformed message during handshake: ") + e.what());
    }
}

class SwitchAdapter::Bridge : public kernel::Controllet {
public:
    Bridge(of::Connection conn, const HandshakeResult& hs, std::uint32_t lb_groups)
        : conn_(std::move(conn)), session_(hs.dpid, hs.ports, lb_groups) {}

    of::Connection& conn() { return conn_; }
    SaSession& session() { return session_; }

    void on_event(kernel::Kernel&, const topic::Topic& topic, ByteView payload) override {
        if (auto bytes = session_.relay_bus_event(topic, payload)) conn_.queue_raw(*bytes);
    }

    bus::Reply on_request(kernel::Kernel&, std::uint64_t, ByteView payload) override {
        return session_.answer_ports_request(payload);
    }

    void on_turn_end(kernel::Kernel& k) override {
        if (lost_) return;
        try {
            conn_.flush();
        } catch (const net::NetError& e) {
            switch_lost(k, e.what());
        }
        publish_stats();
    }

    void on_switch_readable(kernel::Kernel& k) {
        try {
            if (!conn_.fill(milliseconds(0))) {
                switch_lost(k, "switch closed the connection");
                return;
            }
            while (auto raw = conn_.next()) handle_from_switch(k, *raw);
        } catch (const net::NetError& e) {
            switch_lost(k, e.what());
        } catch (const of::DecodeError& e) {
            switch_lost(k, std::string("unparseable OpenFlow stream: ") + e.what());
        }
    }

    SaStats stats() const {
        std::lock_guard lock(stats_mutex_);
        return stats_;
    }

    void publish_stats() {
        const SaCounters& c = session_.counters();
        std::lock_guard lock(stats_mutex_);
        stats_.dpid = session_.dpid();
        stats_.packet_ins_published = c.packet_ins_published;
        stats_.port_status_published = c.port_status_published;
        stats_.unclassifiable_dropped = c.unclassifiable_dropped;
        stats_.relayed = c.relayed;
        stats_.relay_dropped = c.relay_dropped;
        stats_.dropped_not_active = dropped_not_active_;
    }

private:
    void handle_from_switch(kernel::Kernel& k, ByteView raw) {
        of::Message msg;
        try {
            msg = of::decode(raw);
        } catch (const of::DecodeError& e) {
            spdlog::warn("sa {:016x}: bad message from switch: {}", session_.dpid(), e.what());
            return;
        }
        if (const auto* echo = std::get_if<of::EchoRequest>(&msg)) {
            conn_.queue(of::EchoReply{echo->xid, echo->data});
            return;
        }
        const bool publishable = std::holds_alternative<of::PacketIn>(msg) || std::holds_alternative<of::PortStatus>(msg);
        if (publishable && k.state() != kernel::LifecycleState::Active) {
            ++dropped_not_active_;
            return;
        }
        if (auto pub = session_.publish_switch_msg(msg, raw)) k.publish(pub->topic, pub->payload);
    }

    void switch_lost(kernel::Kernel& k, const std::string& why) {
        if (lost_) return;
        lost_ = true;
        spdlog::info("sa {:016x}: {}", session_.dpid(), why);
        k.unwatch(conn_.fd());
        conn_.shutdown();
        k.stop();
    }

    of::Connection conn_;
    SaSession session_;
    std::uint64_t dropped_not_active_ = 0;
    bool lost_ = false;
    mutable std::mutex stats_mutex_;
    SaStats stats_;
};

SwitchAdapter::SwitchAdapter(SaConfig config) : config_(std::move(config)), listener_(net::listen_tcp(config_.listen)) {
    (void)LbAssigner(config_.lb_groups);
}

SwitchAdapter::~SwitchAdapter() = default;

std::uint16_t SwitchAdapter::port() const { return net::local_port(listener_.get()); }

void SwitchAdapter::run() {
    net::Fd fd;
    while (!stopping_ && !killing_ && !fd.valid()) {
        pollfd p[2] = {{listener_.get(), POLLIN, 0}, {waker_.fd(), POLLIN, 0}};
        ::poll(p, 2, -1);
        if (p[1].revents) waker_.drain();
        if (p[0].revents) fd = net::accept_tcp(listener_.get(), milliseconds(0));
    }
    if (!fd.valid()) return;
    listener_.reset();
    net::set_nodelay(fd.get());

    of::Connection conn(std::move(fd));
    const HandshakeResult hs = handshake(conn, config_.handshake_timeout);
    spdlog::info("sa: switch {:016x} connected with {} ports", hs.dpid, hs.ports.size());

    auto bridge = std::make_unique<Bridge>(std::move(conn), hs, config_.lb_groups);
    kernel::KernelConfig kc = config_.kernel;
    kc.name = fmt::format("sa-{:016x}", hs.dpid);
    kc.controllet_type = kControlletType;
    kc.instance_id = hs.dpid;
    kc.to_patterns = {bridge->session().to_pattern()};
    kc.from_topics = SaSession::from_topics();
    kernel::Kernel kernel(kc, *bridge);
    Bridge* b = bridge.get();
    kernel.watch(b->conn().fd(), [b, &kernel] { b->on_switch_readable(kernel); });
    {
        std::lock_guard lock(mutex_);
        bridge_ = std::move(bridge);
        kernel_ = &kernel;
        if (stopping_) kernel.stop();
        if (killing_) kernel.kill();
    }
    kernel.run();
    {
        std::lock_guard lock(mutex_);
        kernel_ = nullptr;
        b->publish_stats();
        b->conn().close();
    }
}

void SwitchAdapter::stop() {
    stopping_ = true;
    waker_.notify();
    std::lock_guard lock(mutex_);
    if (kernel_) kernel_->stop();
}

void SwitchAdapter::kill() {
    killing_ = true;
    waker_.notify();
    std::lock_guard lock(mutex_);
    if (kernel_) kernel_->kill();
    if (bridge_) bridge_->conn().shutdown();
}

SaStats SwitchAdapter::stats() const {
    std::lock_guard lock(mutex_);
    return bridge_ ? bridge_->stats() : SaStats{};
}

kernel::LifecycleState SwitchAdapter::state() const {
    std::lock_guard lock(mutex_);
    return kernel_ ? kernel_->state() : kernel::LifecycleState::Init;
}

bool SwitchAdapter::wait_active(milliseconds timeout) const {
    const auto deadline = SteadyClock::now() + timeout;
    while (SteadyClock::now() < deadline) {
        if (state() == kernel::LifecycleState::Active) return true;
        std::this_thread::sleep_for(milliseconds(5));
    }
    return state() == kernel::LifecycleState::Active;
}

}  // namespace zsdn::sa
