#include "zsdn/harness/bench.hpp"

#include <atomic>
#include <stdexcept>
#include <thread>

#include <spdlog/spdlog.h>

#include "zsdn/frame.hpp"
#include "zsdn/harness/cluster.hpp"
#include "zsdn/harness/mock_switch.hpp"

namespace zsdn::harness {

using std::chrono::milliseconds;

namespace {

constexpr std::uint16_t kBenchPorts = 4;

struct DriverResult {
    std::uint64_t sent = 0;
    std::uint64_t responses = 0;
};

/// Emulated switch: handshake, then PACKET_INs with unknown destinations so
/// every one is answered by exactly one flood PACKET_OUT per replica.
class Driver {
public:
    Driver(std::uint64_t dpid, const net::Endpoint& sa) : core_(dpid, {1, 2, 3, 4}) {
        conn_ = of::Connection(net::connect_tcp(sa, milliseconds(5000)));
        switch_handshake(conn_, core_, milliseconds(10000));
        for (std::uint16_t i = 0; i < 16; ++i) {
            const MacAddr src{0x02, 0x00, static_cast<std::uint8_t>(dpid >> 8), static_cast<std::uint8_t>(dpid), 0x00,
                              static_cast<std::uint8_t>(i + 1)};
            const MacAddr dst{0x02, 0xFF, static_cast<std::uint8_t>(dpid >> 8), static_cast<std::uint8_t>(dpid), 0xFF,
                              static_cast<std::uint8_t>(i + 1)};
            of::PacketIn pin;
            pin.in_port = static_cast<std::uint16_t>(1 + i % kBenchPorts);
            pin.frame = of::build_udp_frame(src, dst);
            pin.total_len = static_cast<std::uint16_t>(pin.frame.size());
            templates_.push_back(of::encode(pin));
        }
    }

    void closed_loop(std::uint64_t limit, const std::atomic<bool>& stop) {
        while (!stop && result_.sent < limit) {
            const std::uint32_t xid = send_one();
            conn_.flush();
            bool answered = false;
            while (!answered && !stop) {
                auto raw = conn_.receive(milliseconds(200));
                if (!raw) continue;
                if (count_response(*raw) && of::decode_header(*raw).xid == xid) answered = true;
            }
        }
    }

    void open_loop(std::uint32_t window, const std::atomic<bool>& stop) {
        std::uint64_t in_flight = 0;
        while (!stop) {
            while (in_flight < window) {
                send_one();
                ++in_flight;
            }
            conn_.flush();
            if (!conn_.fill(milliseconds(50))) throw net::NetError("SA closed the connection");
            while (auto raw = conn_.next()) {
                if (count_response(*raw) && in_flight > 0) --in_flight;
            }
        }
    }

    /// Collects late responses for up to `grace`.
    void drain(milliseconds grace) {
        const auto deadline = Clock::now() + grace;
        while (Clock::now() < deadline) {
            if (!conn_.fill(milliseconds(20))) break;
            while (auto raw = conn_.next()) count_response(*raw);
        }
    }

    DriverResult result() const { return result_; }

private:
    std::uint32_t send_one() {
        Bytes& msg = templates_[result_.sent % templates_.size()];
        const std::uint32_t xid = next_xid_++;
        msg[4] = static_cast<std::uint8_t>(xid >> 24);
        msg[5] = static_cast<std::uint8_t>(xid >> 16);
        msg[6] = static_cast<std::uint8_t>(xid >> 8);
        msg[7] = static_cast<std::uint8_t>(xid);
        conn_.queue_raw(msg);
        ++result_.sent;
        return xid;
    }

    bool count_response(ByteView raw) {
        const of::Header h = of::decode_header(raw);
        if (h.type == static_cast<std::uint8_t>(of::MsgType::PacketOut) ||
            h.type == static_cast<std::uint8_t>(of::MsgType::FlowMod)) {
            ++result_.responses;
            return true;
        }
        if (h.type == static_cast<std::uint8_t>(of::MsgType::EchoRequest)) {
            const auto m = of::decode(raw);
            const auto& e = std::get<of::EchoRequest>(m);
            conn_.queue(of::EchoReply{e.xid, e.data});
        }
        return false;
    }

    SwitchCore core_;
    of::Connection conn_;
    std::vector<Bytes> templates_;
    std::uint32_t next_xid_ = 1;
    DriverResult result_;
};

}  // namespace

BenchReport run_bench(const BenchOptions& o) {
    if (o.switches == 0 || o.replicas == 0 || o.replicas > 256) throw std::invalid_argument("bad bench shape");
    Cluster cluster(o.seed);
    for (std::uint32_t r = 0; r < o.replicas; ++r) cluster.start_learning_switch(static_cast<std::uint8_t>(r));
    LearningSwitchProcess* observer = o.wildcard_observer ? &cluster.start_learning_switch(std::nullopt) : nullptr;
    if (!cluster.wait_active(milliseconds(5000))) throw std::runtime_error("replicas did not become active");

    std::vector<std::unique_ptr<Driver>> drivers;
    for (std::uint32_t s = 0; s < o.switches; ++s) {
        SaProcess& sa = cluster.start_sa(o.replicas);
        drivers.push_back(std::make_unique<Driver>(s + 1, sa.endpoint()));
        if (!sa.adapter().wait_active(milliseconds(5000))) throw std::runtime_error("SA did not become active");
    }

    std::atomic<bool> stop{false};
    const std::uint64_t limit = o.packet_ins_per_switch.value_or(UINT64_MAX);
    const bool fixed = !o.open_loop && o.packet_ins_per_switch.has_value();
    std::vector<std::thread> threads;
    std::atomic<int> failures{0};
    std::atomic<std::uint32_t> finished{0};
    const auto t0 = Clock::now();
    for (auto& d : drivers) {
        threads.emplace_back([&, drv = d.get()] {
            try {
                if (o.open_loop) {
                    drv->open_loop(o.window, stop);
                } else {
                    drv->closed_loop(limit, stop);
                }
            } catch (const std::exception& e) {
                spdlog::error("bench switch: {}", e.what());
                ++failures;
            }
            ++finished;
        });
    }
    if (fixed) {
        // Watchdog for a stalled pipeline.
        const auto give_up = t0 + std::max(o.duration, milliseconds(120000));
        while (finished < o.switches && Clock::now() < give_up) std::this_thread::sleep_for(milliseconds(10));
    } else {
        std::this_thread::sleep_for(o.duration);
    }
    stop = true;
    for (auto& t : threads) t.join();
    const auto elapsed = Clock::now() - t0;

    BenchReport rep;
    rep.switches = o.switches;
    rep.replicas = o.replicas;
    rep.open_loop = o.open_loop;
    rep.duration_s = std::chrono::duration<double>(elapsed).count();
    for (auto& d : drivers) {
        rep.packet_ins_sent += d->result().sent;
        rep.responses += d->result().responses;
    }
    rep.responses_per_s = rep.duration_s > 0 ? static_cast<double>(rep.responses) / rep.duration_s : 0;

    // Let in-flight events reach the replicas before checking conservation.
    const auto deadline = Clock::now() + milliseconds(5000);
    while (true) {
        for (auto& d : drivers) d->drain(milliseconds(20));
        rep.published = 0;
        for (const auto& sa : cluster.sas()) rep.published += sa->adapter().stats().packet_ins_published;
        rep.per_replica.clear();
        rep.delivered = 0;
        for (std::uint32_t r = 0; r < o.replicas; ++r) {
            rep.per_replica.push_back(cluster.learning_switches()[r]->app().packet_ins());
            rep.delivered += rep.per_replica.back();
        }
        const bool observer_done = !observer || observer->app().packet_ins() == rep.published;
        if ((rep.delivered == rep.published && observer_done) || Clock::now() >= deadline) break;
    }
    if (observer) rep.observer = observer->app().packet_ins();
    rep.conservation = rep.published == rep.delivered && rep.published > 0;

    for (auto& d : drivers) d.reset();
    cluster.shutdown();
    if (failures > 0) throw std::runtime_error("bench switch failed");
    if (rep.responses == 0) throw std::runtime_error("bench received zero responses: pipeline broken");
    return rep;
}

std::string format_report(const BenchReport& r) {
    std::string s;
    s += fmt::format("mode: {}\n", r.open_loop ? "open-loop" : "closed-loop");
    s += fmt::format("switches: {}\n", r.switches);
    s += fmt::format("replicas: {}\n", r.replicas);
    s += fmt::format("duration_s: {:.3f}\n", r.duration_s);
    s += fmt::format("packet_ins_sent: {}\n", r.packet_ins_sent);
    s += fmt::format("responses: {}\n", r.responses);
    s += fmt::format("responses_per_s: {:.1f}\n", r.responses_per_s);
    s += "per_replica: [";
    for (std::size_t i = 0; i < r.per_replica.size(); ++i) s += fmt::format("{}{}", i ? ", " : "", r.per_replica[i]);
    s += "]\n";
    if (r.observer) s += fmt::format("wildcard_observer: {}\n", *r.observer);
    s += fmt::format("published: {}\n", r.published);
    s += fmt::format("delivered: {}\n", r.delivered);
    s += fmt::format("conservation: {}\n", r.conservation ? "ok" : "violated");
    return s;
}

}  // namespace zsdn::harness
