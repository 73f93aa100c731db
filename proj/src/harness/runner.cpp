#include <algorithm>
#include <map>
#include <thread>

#include <spdlog/spdlog.h>

#include "zsdn/apps/topology.hpp"
#include "zsdn/harness/cluster.hpp"
#include "zsdn/harness/fabric.hpp"
#include "zsdn/harness/scenario.hpp"

namespace zsdn::harness {

using std::chrono::milliseconds;

namespace {

constexpr std::uint16_t kProbeType = 0x00FE;

std::string dpid_str(std::uint64_t d) { return fmt::format("{:x}", d); }

std::string link_str(const apps::Link& l) {
    return fmt::format("{}:{}-{}:{}", dpid_str(l.a.dpid), l.a.port, dpid_str(l.b.dpid), l.b.port);
}

std::string links_str(const std::vector<apps::Link>& links) {
    std::string s = "[";
    for (std::size_t i = 0; i < links.size(); ++i) s += (i ? " " : "") + link_str(links[i]);
    return s + "]";
}

class Run {
public:
    Run(const Scenario& sc, const RunOptions& opts)
        : sc_(sc), opts_(opts), seed_(opts.seed.value_or(sc.seed)), cluster_(seed_) {}

    ScenarioResult execute() {
        const auto t0 = Clock::now();
        log(fmt::format("scenario {} seed {}", sc_.name, seed_));
        try {
            boot();
            for (std::size_t i = 0; i < sc_.steps.size(); ++i) {
                step_no_ = i + 1;
                std::visit([this](const auto& s) { this->run(s); }, sc_.steps[i]);
            }
        } catch (const std::exception& e) {
            fail(std::string("aborted: ") + e.what());
        }
        fabric_.stop();
        cluster_.shutdown();
        log(passed_ ? "result PASS" : "result FAIL");
        return ScenarioResult{passed_, transcript_,
                              std::chrono::duration_cast<milliseconds>(Clock::now() - t0)};
    }

private:
    void log(std::string line) { transcript_.push_back(std::move(line)); }
    void fail(const std::string& what) {
        passed_ = false;
        log("FAIL " + what);
    }
    void check(bool ok, const std::string& what, const std::string& detail) {
        if (ok) {
            log(fmt::format("step {} {}: ok", step_no_, what));
        } else {
            fail(fmt::format("step {} {}: {}", step_no_, what, detail));
        }
    }

    void boot() {
        for (const auto& s : sc_.switches) fabric_.add_switch(s.dpid, s.ports);
        for (const auto& l : sc_.links) fabric_.add_link(l.a, l.pa, l.b, l.pb);
        for (const auto& h : sc_.hosts) fabric_.add_host(HostSpec{h.name, h.mac, h.dpid, h.port});

        const auto& c = sc_.controllets;
        const std::uint32_t groups = std::max<std::uint32_t>(1, c.learning_replicas);
        for (std::uint32_t g = 0; g < c.learning_replicas; ++g) {
            cluster_.start_learning_switch(static_cast<std::uint8_t>(g));
        }
        if (c.learning_wildcard) cluster_.start_learning_switch(std::nullopt);
        if (c.topology) topology_ = &cluster_.start_topology(apps::TopologyOptions{c.lldp_period});

        for (const auto& s : sc_.switches) {
            SaProcess& sa = cluster_.start_sa(groups);
            sa_by_dpid_[s.dpid] = &sa;
            fabric_.at(s.dpid).connect(sa.endpoint());
            if (!sa.adapter().wait_active(milliseconds(5000))) throw ScenarioError("SA for " + dpid_str(s.dpid) + " did not become active");
        }
        if (!cluster_.wait_active(milliseconds(5000))) throw ScenarioError("controllets did not become active");
        log(fmt::format("boot switches={} links={} hosts={} learning_replicas={}{} topology={}", sc_.switches.size(),
                        sc_.links.size(), sc_.hosts.size(), c.learning_replicas, c.learning_wildcard ? "+wildcard" : "",
                        c.topology ? "yes" : "no"));
    }

    void settle(const std::string& what) {
        if (!fabric_.wait_quiescent(opts_.settle_timeout)) fail(fmt::format("step {} {}: traffic did not settle", step_no_, what));
    }

    void run(const step::Send& s) {
        const std::string what = fmt::format("send {} -> {} x{}", s.from, s.to, s.count);
        for (std::uint32_t i = 0; i < s.count; ++i) {
            fabric_.send(s.from, s.to);
            settle(what);
        }
        log(fmt::format("step {} {}", step_no_, what));
    }

    void run(const step::Sleep& s) {
        std::this_thread::sleep_for(s.duration);
        log(fmt::format("step {} sleep {}ms", step_no_, s.duration.count()));
    }

    void run(const step::ExpectPacketIns& e) {
        const auto got = fabric_.at(e.dpid).counters().packet_ins;
        check(got == e.count, fmt::format("expect packet_ins switch {} == {}", dpid_str(e.dpid), e.count),
              fmt::format("got {}", got));
    }

    void run(const step::ExpectReceived& e) {
        const auto frames = fabric_.received(e.host);
        std::uint64_t got = 0;
        for (const auto& r : frames) {
            if (!e.from || r.src == fabric_.host(*e.from).mac) ++got;
        }
        check(got == e.count,
              fmt::format("expect received {}{} == {}", e.host, e.from ? " from " + *e.from : "", e.count),
              fmt::format("got {}", got));
    }

    std::string mac_of(const std::string& text) {
        for (const auto& h : sc_.hosts) {
            if (h.name == text) return mac_to_string(h.mac);
        }
        return mac_to_string(mac_from_string(text));
    }

    void run(const step::ExpectFlows& e) {
        std::vector<std::string> want;
        for (const auto& f : e.flows) want.push_back(fmt::format("dl_dst={} out={}", mac_of(f.dl_dst), f.out_port));
        std::vector<std::string> got;
        for (const auto& f : fabric_.at(e.dpid).flows()) {
            std::string line;
            if (f.match.wildcards == (of::wildcard::kAll & ~of::wildcard::kDlDst)) {
                line = "dl_dst=" + mac_to_string(f.match.dl_dst);
            } else {
                line = fmt::format("match(wildcards={:#x})", f.match.wildcards);
            }
            for (const auto& a : f.actions) {
                if (const auto* o = std::get_if<of::OutputAction>(&a)) {
                    line += fmt::format(" out={}", o->port);
                } else {
                    line += " raw-action";
                }
            }
            got.push_back(line);
        }
        std::sort(want.begin(), want.end());
        std::sort(got.begin(), got.end());
        auto join = [](const std::vector<std::string>& v) {
            std::string s = "[";
            for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + v[i];
            return s + "]";
        };
        check(got == want, fmt::format("expect flows switch {} == {}", dpid_str(e.dpid), join(want)),
              "got " + join(got));
    }

    std::vector<apps::Link> query_links(bus::Session& probe) {
        const bus::Reply r = probe.request(topology_->kernel().instance_id(), Bytes{bus::opcode::kLinks}, milliseconds(2000));
        if (r.status != bus::status::kOk) throw ScenarioError(fmt::format("LINKS request failed with status {}", r.status));
        return apps::decode_links(r.payload);
    }

    void run(const step::ExpectLinks& e) {
        std::vector<apps::Link> want;
        for (const auto& l : e.links.value_or(sc_.links)) want.push_back(apps::Link::canonical({l.a, l.pa}, {l.b, l.pb}));
        std::sort(want.begin(), want.end());
        auto probe = bus::Session::connect(cluster_.bus());
        bus::RegisterBody body;
        body.controllet_type = kProbeType;
        body.instance_id = 0x5B00000000000000ull | (seed_ << 16) | step_no_;
        if (probe.register_controllet(body) != bus::status::kOk) throw ScenarioError("probe registration rejected");
        const auto deadline = Clock::now() + e.within;
        std::vector<apps::Link> got;
        while (true) {
            got = query_links(probe);
            if (got == want || Clock::now() >= deadline) break;
            std::this_thread::sleep_for(milliseconds(50));
        }
        probe.bye();
        check(got == want, fmt::format("expect links within {}ms == {}", e.within.count(), links_str(want)),
              "got " + links_str(got));
    }

    void run(const step::KillSa& k) {
        sa_by_dpid_.at(k.dpid)->kill();
        log(fmt::format("step {} kill sa {}", step_no_, dpid_str(k.dpid)));
    }

    const Scenario& sc_;
    RunOptions opts_;
    std::uint64_t seed_;
    Cluster cluster_;
    Fabric fabric_;
    TopologyProcess* topology_ = nullptr;
    std::map<std::uint64_t, SaProcess*> sa_by_dpid_;
    std::vector<std::string> transcript_;
    std::size_t step_no_ = 0;
    bool passed_ = true;
};

}  // namespace

ScenarioResult run_scenario(const Scenario& scenario, const RunOptions& options) {
    Run run(scenario, options);
    return run.execute();
}

}  // namespace zsdn::harness
