#include <csignal>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "zsdn/apps/learning_switch.hpp"
#include "zsdn/apps/topology.hpp"
#include "zsdn/bus/broker.hpp"
#include "zsdn/frame.hpp"
#include "zsdn/harness/bench.hpp"
#include "zsdn/harness/mock_switch.hpp"
#include "zsdn/harness/scenario.hpp"
#include "zsdn/kernel/kernel.hpp"
#include "zsdn/sa/switch_adapter.hpp"

namespace {

using namespace zsdn;
using std::chrono::milliseconds;

constexpr std::uint16_t kDefaultBusPort = 7633;

std::function<void()> g_on_signal;

void handle_signal(int) {
    if (g_on_signal) g_on_signal();
}

void on_shutdown_signal(std::function<void()> fn) {
    g_on_signal = std::move(fn);
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
}

std::string default_bus() {
    if (const char* env = std::getenv("ZSDN_BUS_ADDR"); env && *env) return env;
    return "127.0.0.1:" + std::to_string(kDefaultBusPort);
}

std::uint64_t parse_hex(const std::string& s, int max_digits, const std::string& what) {
    std::string t = s;
    if (t.rfind("0x", 0) == 0 || t.rfind("0X", 0) == 0) t = t.substr(2);
    if (t.empty() || static_cast<int>(t.size()) > max_digits ||
        t.find_first_not_of("0123456789abcdefABCDEF") != std::string::npos) {
        throw CLI::ValidationError(what, "expected up to " + std::to_string(max_digits) + " hex digits, got '" + s + "'");
    }
    return std::stoull(t, nullptr, 16);
}

struct KernelFlags {
    std::string bus = default_bus();
    std::string instance_id;
    std::string type;

    void add_to(CLI::App* app) {
        app->add_option("--bus", bus, "Broker address host:port (env ZSDN_BUS_ADDR)")->capture_default_str();
        app->add_option("--instance-id", instance_id, "Instance id, 8-byte hex (default: random)");
        app->add_option("--type", type, "Controllet type code, 2-byte hex (overrides the built-in code)");
    }

    kernel::KernelConfig apply(kernel::KernelConfig c) const {
        c.bus = net::Endpoint::parse(bus);
        if (!instance_id.empty()) c.instance_id = parse_hex(instance_id, 16, "--instance-id");
        if (!type.empty()) c.controllet_type = static_cast<std::uint16_t>(parse_hex(type, 4, "--type"));
        return c;
    }
};

int run_kernel(kernel::KernelConfig config, kernel::Controllet& app) {
    kernel::Kernel k(std::move(config), app);
    on_shutdown_signal([&k] { k.stop(); });
    spdlog::info("{}: instance {:016x} type {:04x} bus {}", k.config().name, k.instance_id(), k.config().controllet_type,
                 k.config().bus.to_string());
    k.run();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ZeroSDN: controllets on a pub/sub message bus"};
    app.require_subcommand(1);
    std::string log_level = "info";
    app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")->capture_default_str();

    // broker
    auto* broker_cmd = app.add_subcommand("broker", "Run the message bus broker");
    std::string broker_listen = "0.0.0.0:" + std::to_string(kDefaultBusPort);
    broker_cmd->add_option("--listen", broker_listen, "Listen address host:port")->capture_default_str();

    // sa
    auto* sa_cmd = app.add_subcommand("sa", "Run a SwitchAdapter for one OpenFlow switch");
    std::string sa_listen = "0.0.0.0:6633";
    std::uint32_t lb_groups = 1;
    KernelFlags sa_flags;
    sa_cmd->add_option("--listen", sa_listen, "OpenFlow listen address host:port")->capture_default_str();
    sa_cmd->add_option("--lb-groups", lb_groups, "Number of LB groups for PACKET_IN round robin")
        ->check(CLI::Range(1, 256))
        ->capture_default_str();
    sa_cmd->add_option("--bus", sa_flags.bus, "Broker address host:port (env ZSDN_BUS_ADDR)")->capture_default_str();

    // controllet
    auto* ctl_cmd = app.add_subcommand("controllet", "Run a controllet");
    ctl_cmd->require_subcommand(1);
    auto* ls_cmd = ctl_cmd->add_subcommand("learning-switch", "L2 learning switch");
    KernelFlags ls_flags;
    ls_flags.add_to(ls_cmd);
    int lb_group = -1;
    bool lb_wildcard = false;
    auto* lb_opt = ls_cmd->add_option("--lb-group", lb_group, "Serve one LB group (0..255)")->check(CLI::Range(0, 255));
    ls_cmd->add_flag("--lb-wildcard", lb_wildcard, "Serve every LB group")->excludes(lb_opt);

    auto* topo_cmd = ctl_cmd->add_subcommand("topology", "LLDP topology discovery");
    KernelFlags topo_flags;
    topo_flags.add_to(topo_cmd);
    std::uint32_t lldp_period = 1000;
    topo_cmd->add_option("--lldp-period", lldp_period, "LLDP cycle in ms")->check(CLI::PositiveNumber)->capture_default_str();

    // mock-switch
    auto* ms_cmd = app.add_subcommand("mock-switch", "Run a mock OpenFlow 1.0 switch");
    std::string ms_dpid;
    std::string ms_connect = "127.0.0.1:6633";
    std::uint16_t ms_ports = 4;
    std::uint32_t ms_inject_ms = 0;
    ms_cmd->add_option("--dpid", ms_dpid, "Datapath id, hex")->required();
    ms_cmd->add_option("--connect", ms_connect, "SwitchAdapter address host:port")->capture_default_str();
    ms_cmd->add_option("--ports", ms_ports, "Number of ports (numbered from 1)")->check(CLI::Range(1, 255))->capture_default_str();
    ms_cmd->add_option("--inject-every", ms_inject_ms, "Inject a test frame every N ms (0: never)")->capture_default_str();

    // run-scenario
    auto* sc_cmd = app.add_subcommand("run-scenario", "Run a scenario file and print its transcript");
    std::string sc_file;
    std::optional<std::uint64_t> sc_seed;
    sc_cmd->add_option("file", sc_file, "Scenario YAML file")->required()->check(CLI::ExistingFile);
    sc_cmd->add_option("--seed", sc_seed, "Override the scenario seed");

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "Cbench-style PACKET_IN throughput benchmark");
    harness::BenchOptions bench;
    double bench_duration_s = 10;
    bench_cmd->add_option("--switches", bench.switches, "Emulated switches")->check(CLI::Range(1, 1024))->capture_default_str();
    bench_cmd->add_option("--replicas", bench.replicas, "Learning-switch replicas (LB groups)")
        ->check(CLI::Range(1, 256))
        ->capture_default_str();
    bench_cmd->add_option("--duration", bench_duration_s, "Seconds")->check(CLI::PositiveNumber)->capture_default_str();
    bench_cmd->add_flag("--open-loop", bench.open_loop, "Keep a window of PACKET_INs in flight");
    bench_cmd->add_option("--window", bench.window, "Open-loop window per switch")->capture_default_str();
    bench_cmd->add_option("--count", bench.packet_ins_per_switch, "Closed loop: exact PACKET_INs per switch");
    bench_cmd->add_flag("--wildcard-observer", bench.wildcard_observer, "Add a replica with a wildcarded LB byte");

    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(spdlog::level::from_str(log_level));

    try {
        if (broker_cmd->parsed()) {
            bus::BrokerOptions opts;
            opts.listen = net::Endpoint::parse(broker_listen);
            bus::Broker broker(opts);
            on_shutdown_signal([&broker] { broker.stop(); });
            spdlog::info("broker listening on {}:{}", opts.listen.host, broker.port());
            broker.run();
            return 0;
        }
        if (sa_cmd->parsed()) {
            sa::SaConfig config;
            config.listen = net::Endpoint::parse(sa_listen);
            config.lb_groups = lb_groups;
            config.kernel.bus = net::Endpoint::parse(sa_flags.bus);
            sa::SwitchAdapter adapter(config);
            on_shutdown_signal([&adapter] { adapter.stop(); });
            spdlog::info("sa: waiting for a switch on {}:{}", config.listen.host, adapter.port());
            adapter.run();
            return 0;
        }
        if (ls_cmd->parsed()) {
            std::optional<std::uint8_t> group;
            if (!lb_wildcard) group = static_cast<std::uint8_t>(lb_group < 0 ? 0 : lb_group);
            kernel::KernelConfig base;
            base.name = "learning-switch";
            auto config = ls_flags.apply(apps::LearningSwitch::config(base, group));
            apps::LearningSwitch ls;
            return run_kernel(std::move(config), ls);
        }
        if (topo_cmd->parsed()) {
            apps::TopologyOptions opts{milliseconds(lldp_period)};
            kernel::KernelConfig base;
            base.name = "topology";
            auto config = topo_flags.apply(apps::Topology::config(base, opts));
            apps::Topology topo(opts);
            return run_kernel(std::move(config), topo);
        }
        if (ms_cmd->parsed()) {
            const std::uint64_t dpid = parse_hex(ms_dpid, 16, "--dpid");
            std::vector<std::uint16_t> ports;
            for (std::uint16_t p = 1; p <= ms_ports; ++p) ports.push_back(p);
            harness::MockSwitch sw(dpid, ports, [](std::uint64_t d, std::uint16_t port, Bytes frame) {
                spdlog::info("switch {:x}: {} bytes out port {}", d, frame.size(), port);
            });
            std::atomic<bool> stop{false};
            on_shutdown_signal([&stop] { stop = true; });
            sw.connect(net::Endpoint::parse(ms_connect));
            spdlog::info("mock switch {:016x} connected to {}", dpid, ms_connect);
            std::uint64_t n = 0;
            while (!stop && sw.connected()) {
                if (ms_inject_ms > 0) {
                    const auto port = static_cast<std::uint16_t>(1 + n % ms_ports);
                    const MacAddr src{0x02, 0, 0, 0, static_cast<std::uint8_t>(dpid), static_cast<std::uint8_t>(port)};
                    const MacAddr dst{0x02, 0, 0, 0, static_cast<std::uint8_t>(dpid),
                                      static_cast<std::uint8_t>(1 + (n + 1) % ms_ports)};
                    sw.inject(port, of::build_udp_frame(src, dst));
                    ++n;
                    std::this_thread::sleep_for(milliseconds(ms_inject_ms));
                } else {
                    std::this_thread::sleep_for(milliseconds(100));
                }
            }
            sw.stop();
            const auto c = sw.counters();
            std::cout << "packet_ins: " << c.packet_ins << "\nflow_mods: " << c.flow_mods
                      << "\npacket_outs: " << c.packet_outs << "\nforwarded: " << c.forwarded << "\n";
            return 0;
        }
        if (sc_cmd->parsed()) {
            const harness::Scenario sc = harness::load_scenario_file(sc_file);
            harness::RunOptions opts;
            opts.seed = sc_seed;
            const harness::ScenarioResult r = harness::run_scenario(sc, opts);
            for (const auto& line : r.transcript) std::cout << line << "\n";
            return r.passed ? 0 : 1;
        }
        if (bench_cmd->parsed()) {
            bench.duration = milliseconds(static_cast<std::int64_t>(bench_duration_s * 1000));
            const harness::BenchReport r = harness::run_bench(bench);
            std::cout << harness::format_report(r);
            return r.conservation ? 0 : 1;
        }
    } catch (const harness::ScenarioError& e) {
        std::cerr << "scenario error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
