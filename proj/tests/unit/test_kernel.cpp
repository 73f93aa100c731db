#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>

#include "zsdn/bus/session.hpp"
#include "zsdn/harness/cluster.hpp"
#include "zsdn/kernel/kernel.hpp"

using namespace zsdn;
using namespace zsdn::kernel;
using namespace std::chrono_literals;

namespace {

bus::BrokerOptions ephemeral() {
    bus::BrokerOptions o;
    o.listen = {"127.0.0.1", 0};
    return o;
}

struct Recorder : Controllet {
    std::mutex mu;
    std::vector<LifecycleState> states;
    std::vector<std::pair<Member, bool>> members;
    std::vector<Bytes> events;
    std::atomic<int> ticks{0};
    std::atomic<bool> early_publish_rejected{false};

    void on_lifecycle(Kernel& k, LifecycleState s) override {
        std::lock_guard l(mu);
        states.push_back(s);
        if (s == LifecycleState::WaitingDeps) {
            try {
                k.publish(topic::encode_port_status_topic(), {});
            } catch (const std::logic_error&) {
                early_publish_rejected = true;
            }
        }
    }
    void on_event(Kernel&, const topic::Topic&, ByteView payload) override {
        std::lock_guard l(mu);
        events.emplace_back(payload.begin(), payload.end());
    }
    bus::Reply on_request(Kernel&, std::uint64_t, ByteView payload) override {
        Bytes echo(payload.begin(), payload.end());
        echo.push_back(0xEE);
        return {bus::status::kOk, echo};
    }
    void on_member(Kernel&, const Member& m, bool joined) override {
        std::lock_guard l(mu);
        members.emplace_back(m, joined);
    }
    void on_tick(Kernel&) override { ++ticks; }

    /// Callbacks run just after the state flips; wait for them to land.
    bool saw(LifecycleState wanted, std::chrono::milliseconds timeout = 2000ms) {
        const auto deadline = std::chrono::steady_clock::now() + timeout;
        while (std::chrono::steady_clock::now() < deadline) {
            {
                std::lock_guard l(mu);
                if (std::find(states.begin(), states.end(), wanted) != states.end()) return true;
            }
            std::this_thread::sleep_for(5ms);
        }
        return false;
    }
};

KernelConfig config_for(const net::Endpoint& bus, std::uint64_t id) {
    KernelConfig c;
    c.name = "test-" + std::to_string(id);
    c.bus = bus;
    c.controllet_type = 0x0042;
    c.instance_id = id;
    c.backoff_min = 50ms;
    c.backoff_max = 200ms;
    c.seed = id;
    return c;
}

struct Running {
    Recorder app;
    std::unique_ptr<Kernel> kernel;
    std::thread thread;
    explicit Running(KernelConfig c) : kernel(std::make_unique<Kernel>(std::move(c), app)) {
        thread = std::thread([this] { kernel->run(); });
    }
    ~Running() {
        kernel->stop();
        thread.join();
    }
};

bus::Session probe(const net::Endpoint& ep, std::uint64_t id, std::uint16_t type,
                   std::vector<topic::SubscriptionPattern> to = {}) {
    auto s = bus::Session::connect(ep);
    bus::RegisterBody b;
    b.controllet_type = type;
    b.instance_id = id;
    b.to_patterns = std::move(to);
    REQUIRE(s.register_controllet(b) == bus::status::kOk);
    return s;
}

}  // namespace

TEST_SUITE("kernel") {
    TEST_CASE("backoff schedule") {
        KernelConfig c;
        std::mt19937_64 rng(1);
        for (unsigned attempt = 0; attempt < 12; ++attempt) {
            const double base = std::min(500.0 * (1u << std::min(attempt, 10u)), 8000.0);
            for (int i = 0; i < 50; ++i) {
                const auto d = backoff_delay(c, attempt, rng);
                CHECK(d.count() >= static_cast<std::int64_t>(base * 0.8) - 1);
                CHECK(d.count() <= static_cast<std::int64_t>(base * 1.2) + 1);
            }
        }
        c.backoff_jitter = 0;
        CHECK(backoff_delay(c, 0, rng) == 500ms);
        CHECK(backoff_delay(c, 4, rng) == 8000ms);
        CHECK(backoff_delay(c, 30, rng) == 8000ms);
    }

    TEST_CASE("no dependencies: straight to ACTIVE") {
        harness::BrokerProcess broker(ephemeral());
        Running r(config_for(broker.endpoint(), 0x10));
        REQUIRE(r.kernel->wait_for_state(LifecycleState::Active, 3s));
        REQUIRE(r.app.saw(LifecycleState::Active));
        std::lock_guard l(r.app.mu);
        CHECK(r.app.states == std::vector<LifecycleState>{LifecycleState::Connecting, LifecycleState::Active});
    }

    TEST_CASE("dependency gating holds back ACTIVE until the peer joins") {
        harness::BrokerProcess broker(ephemeral());
        auto c = config_for(broker.endpoint(), 0x11);
        c.deps.required.push_back({0x0000, 1});
        Running r(c);
        REQUIRE(r.kernel->wait_for_state(LifecycleState::WaitingDeps, 3s));
        REQUIRE(r.app.saw(LifecycleState::WaitingDeps));
        CHECK(r.app.early_publish_rejected);
        std::this_thread::sleep_for(100ms);
        CHECK(r.kernel->state() == LifecycleState::WaitingDeps);
        auto sa = probe(broker.endpoint(), 0x99, 0x0000);
        REQUIRE(r.kernel->wait_for_state(LifecycleState::Active, 3s));
        sa.bye();
        std::this_thread::sleep_for(200ms);
        CHECK(r.kernel->state() == LifecycleState::Active);
        std::lock_guard l(r.app.mu);
        REQUIRE(r.app.members.size() == 2);
        CHECK(r.app.members[0] == std::pair<Member, bool>{{0x0000, 0x99}, true});
        CHECK(r.app.members[1] == std::pair<Member, bool>{{0x0000, 0x99}, false});
    }

    TEST_CASE("peers already registered satisfy dependencies through LIST") {
        harness::BrokerProcess broker(ephemeral());
        auto sa = probe(broker.endpoint(), 0x99, 0x0000);
        auto c = config_for(broker.endpoint(), 0x12);
        c.deps.required.push_back({0x0000, 1});
        Running r(c);
        REQUIRE(r.kernel->wait_for_state(LifecycleState::Active, 3s));
        REQUIRE(r.app.saw(LifecycleState::Active));
        std::lock_guard l(r.app.mu);
        CHECK(r.app.states == std::vector<LifecycleState>{LifecycleState::Connecting, LifecycleState::Active});
    }

    TEST_CASE("events, requests and ticks reach the controllet") {
        harness::BrokerProcess broker(ephemeral());
        auto c = config_for(broker.endpoint(), 0x13);
        c.to_patterns.push_back(topic::pattern_from_text("02.0000.00.0C"));
        c.tick_period = 50ms;
        Running r(c);
        REQUIRE(r.kernel->wait_for_state(LifecycleState::Active, 3s));
        auto p = probe(broker.endpoint(), 0x77, 0x00FE);
        for (std::uint8_t i = 0; i < 5; ++i) p.publish(topic::encode_port_status_topic(), Bytes{i});
        p.flush();
        const auto reply = p.request(0x13, from_hex("0102"), 2000ms);
        CHECK(reply.status == bus::status::kOk);
        CHECK(reply.payload == from_hex("0102EE"));
        std::this_thread::sleep_for(300ms);
        CHECK(r.app.ticks >= 3);
        std::lock_guard l(r.app.mu);
        CHECK(r.app.events == std::vector<Bytes>{{0}, {1}, {2}, {3}, {4}});
    }

    TEST_CASE("registry view follows the broker") {
        harness::BrokerProcess broker(ephemeral());
        auto a = probe(broker.endpoint(), 0xA, 0x0000);
        Running r(config_for(broker.endpoint(), 0x14));
        REQUIRE(r.kernel->wait_for_state(LifecycleState::Active, 3s));
        auto b = probe(broker.endpoint(), 0xB, 0x0001);
        a.bye();
        auto observer = probe(broker.endpoint(), 0xC, 0x00FE);
        std::vector<Member> expected;
        for (int i = 0; i < 100; ++i) {
            const auto rep = observer.request(bus::kBrokerId, Bytes{bus::opcode::kList}, 1000ms);
            expected = bus::lifecycle::decode_members(rep.payload);
            std::lock_guard l(r.app.mu);
            if (r.app.members.size() >= 3) break;
            std::this_thread::sleep_for(10ms);
        }
        r.kernel->stop();
        r.thread.join();
        r.thread = std::thread([] {});
        CHECK(r.kernel->registry().members() == expected);
    }

    TEST_CASE("duplicate id keeps retrying until the holder leaves") {
        harness::BrokerProcess broker(ephemeral());
        auto holder = probe(broker.endpoint(), 0x15, 0x0042);
        Running r(config_for(broker.endpoint(), 0x15));
        std::this_thread::sleep_for(300ms);
        CHECK(r.kernel->state() == LifecycleState::Connecting);
        holder.bye();
        CHECK(r.kernel->wait_for_state(LifecycleState::Active, 3s));
    }

    TEST_CASE("broker restart: reconnect and re-register") {
        net::Fd l = net::listen_tcp({"127.0.0.1", 0});
        const std::uint16_t port = net::local_port(l.get());
        l.reset();
        bus::BrokerOptions o;
        o.listen = {"127.0.0.1", port};
        auto broker = std::make_unique<harness::BrokerProcess>(o);
        Running r(config_for(broker->endpoint(), 0x16));
        REQUIRE(r.kernel->wait_for_state(LifecycleState::Active, 3s));
        broker.reset();
        REQUIRE(r.kernel->wait_for_state(LifecycleState::Connecting, 3s));
        broker = std::make_unique<harness::BrokerProcess>(o);
        REQUIRE(r.kernel->wait_for_state(LifecycleState::Active, 5s));
        auto p = probe(broker->endpoint(), 0x77, 0x00FE);
        CHECK(p.request(0x16, from_hex("AA"), 2000ms).payload == from_hex("AAEE"));
    }

    TEST_CASE("stop sends BYE, kill drops the connection; both produce LEAVE") {
        harness::BrokerProcess broker(ephemeral());
        auto watcher = probe(broker.endpoint(), 0x1, 0x00FE, {bus::lifecycle::any_pattern()});
        for (bool graceful : {true, false}) {
            Recorder app;
            Kernel k(config_for(broker.endpoint(), 0x17), app);
            std::thread t([&] { k.run(); });
            REQUIRE(k.wait_for_state(LifecycleState::Active, 3s));
            const auto start = std::chrono::steady_clock::now();
            graceful ? k.stop() : k.kill();
            t.join();
            CHECK(k.state() == LifecycleState::Stopped);
            bool left = false;
            while (!left && std::chrono::steady_clock::now() - start < 3s) {
                auto in = watcher.next_event(100ms);
                if (!in) continue;
                const auto& ev = std::get<bus::Event>(*in);
                left = ev.topic == bus::lifecycle::topic_for(bus::lifecycle::kLeave) &&
                       bus::lifecycle::decode_member(ev.payload).instance_id == 0x17;
            }
            CHECK(left);
        }
    }

    TEST_CASE("stop while the broker is unreachable") {
        net::Fd l = net::listen_tcp({"127.0.0.1", 0});
        const std::uint16_t port = net::local_port(l.get());
        l.reset();
        auto c = config_for({"127.0.0.1", port}, 0x18);
        c.session.connect_timeout = 100ms;
        Running r(c);
        std::this_thread::sleep_for(300ms);
        CHECK(r.kernel->state() == LifecycleState::Connecting);
    }
}
