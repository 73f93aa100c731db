#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "zsdn/harness/scenario.hpp"

namespace zsdn::harness {

namespace {

std::string where(const YAML::Node& n) {
    const auto m = n.Mark();
    if (m.line < 0) return "";
    return " (line " + std::to_string(m.line + 1) + ")";
}

std::uint64_t as_u64(const YAML::Node& n, const std::string& what) {
    if (!n || !n.IsScalar()) throw ScenarioError("missing or non-scalar " + what + where(n));
    const std::string s = n.Scalar();
    try {
        std::size_t used = 0;
        const std::uint64_t v = std::stoull(s, &used, 0);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ScenarioError("invalid number for " + what + ": '" + s + "'" + where(n));
    }
}

std::uint16_t as_port(const YAML::Node& n, const std::string& what) {
    const std::uint64_t v = as_u64(n, what);
    if (v == 0 || v >= 0xFF00) throw ScenarioError(what + " out of range" + where(n));
    return static_cast<std::uint16_t>(v);
}

std::string as_string(const YAML::Node& n, const std::string& what) {
    if (!n || !n.IsScalar()) throw ScenarioError("missing " + what + where(n));
    return n.Scalar();
}

std::chrono::milliseconds as_ms(const YAML::Node& n, const std::string& what) {
    return std::chrono::milliseconds(as_u64(n, what));
}

LinkDecl parse_link(const YAML::Node& n) {
    if (!n.IsSequence() || n.size() != 4) throw ScenarioError("link must be [dpidA, portA, dpidB, portB]" + where(n));
    return LinkDecl{as_u64(n[0], "link dpid"), as_port(n[1], "link port"), as_u64(n[2], "link dpid"),
                    as_port(n[3], "link port")};
}

Step parse_step(const YAML::Node& n) {
    if (!n.IsMap() || n.size() != 1) throw ScenarioError("each step is a single-key map" + where(n));
    const std::string kind = n.begin()->first.Scalar();
    const YAML::Node v = n.begin()->second;
    if (kind == "send") {
        step::Send s{as_string(v["from"], "send.from"), as_string(v["to"], "send.to"), 1};
        if (v["count"]) s.count = static_cast<std::uint32_t>(as_u64(v["count"], "send.count"));
        return s;
    }
    if (kind == "sleep") return step::Sleep{as_ms(v["ms"], "sleep.ms")};
    if (kind == "expect_packet_ins") {
        return step::ExpectPacketIns{as_u64(v["switch"], "expect_packet_ins.switch"),
                                     as_u64(v["count"], "expect_packet_ins.count")};
    }
    if (kind == "expect_received") {
        step::ExpectReceived e{as_string(v["host"], "expect_received.host"), std::nullopt,
                               as_u64(v["count"], "expect_received.count")};
        if (v["from"]) e.from = as_string(v["from"], "expect_received.from");
        return e;
    }
    if (kind == "expect_flows") {
        step::ExpectFlows e{as_u64(v["switch"], "expect_flows.switch"), {}};
        const YAML::Node flows = v["flows"];
        if (!flows || !flows.IsSequence()) throw ScenarioError("expect_flows.flows must be a list" + where(v));
        for (const auto& f : flows) {
            e.flows.push_back(step::FlowDecl{as_string(f["dl_dst"], "flow.dl_dst"), as_port(f["out"], "flow.out")});
        }
        return e;
    }
    if (kind == "expect_links") {
        step::ExpectLinks e;
        if (v["within_ms"]) e.within = as_ms(v["within_ms"], "expect_links.within_ms");
        if (v["links"]) {
            std::vector<LinkDecl> links;
            for (const auto& l : v["links"]) links.push_back(parse_link(l));
            e.links = links;
        }
        return e;
    }
    if (kind == "kill_sa") return step::KillSa{as_u64(v["switch"], "kill_sa.switch")};
    throw ScenarioError("unknown step '" + kind + "'" + where(n));
}

class DisjointSets {
public:
    std::uint64_t find(std::uint64_t x) {
        auto it = parent_.try_emplace(x, x).first;
        if (it->second == x) return x;
        const std::uint64_t root = find(it->second);
        parent_[x] = root;
        return root;
    }
    bool unite(std::uint64_t a, std::uint64_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent_[a] = b;
        return true;
    }

private:
    std::map<std::uint64_t, std::uint64_t> parent_;
};

void validate(const Scenario& sc) {
    std::map<std::uint64_t, std::set<std::uint16_t>> ports;
    for (const auto& s : sc.switches) {
        if (s.dpid == 0) throw ScenarioError("switch dpid 0 is reserved");
        if (ports.contains(s.dpid)) throw ScenarioError("duplicate switch " + std::to_string(s.dpid));
        ports[s.dpid] = std::set<std::uint16_t>(s.ports.begin(), s.ports.end());
        if (ports[s.dpid].size() != s.ports.size()) throw ScenarioError("duplicate port on switch " + std::to_string(s.dpid));
    }
    std::set<std::pair<std::uint64_t, std::uint16_t>> used;
    auto claim = [&](std::uint64_t dpid, std::uint16_t port, const std::string& who) {
        auto it = ports.find(dpid);
        if (it == ports.end()) throw ScenarioError(who + " references undeclared switch " + std::to_string(dpid));
        if (!it->second.contains(port)) {
            throw ScenarioError(who + " references undeclared port " + std::to_string(port) + " on switch " +
                                std::to_string(dpid));
        }
        if (!used.insert({dpid, port}).second) {
            throw ScenarioError(who + ": port " + std::to_string(port) + " on switch " + std::to_string(dpid) +
                                " is already wired");
        }
    };
    DisjointSets sets;
    for (const auto& l : sc.links) {
        claim(l.a, l.pa, "link");
        claim(l.b, l.pb, "link");
        if (!sets.unite(l.a, l.b)) {
            throw ScenarioError("link " + std::to_string(l.a) + ":" + std::to_string(l.pa) + " - " + std::to_string(l.b) +
                                ":" + std::to_string(l.pb) + " closes a loop; topologies must be trees");
        }
    }
    std::set<std::string> names;
    std::set<MacAddr> macs;
    for (const auto& h : sc.hosts) {
        claim(h.dpid, h.port, "host " + h.name);
        if (!names.insert(h.name).second) throw ScenarioError("duplicate host " + h.name);
        if (!macs.insert(h.mac).second) throw ScenarioError("duplicate MAC on host " + h.name);
    }
    auto known_host = [&](const std::string& n) {
        if (!names.contains(n)) throw ScenarioError("step references unknown host " + n);
    };
    auto known_switch = [&](std::uint64_t d) {
        if (!ports.contains(d)) throw ScenarioError("step references unknown switch " + std::to_string(d));
    };
    for (const auto& st : sc.steps) {
        if (const auto* s = std::get_if<step::Send>(&st)) {
            known_host(s->from);
            known_host(s->to);
        } else if (const auto* e = std::get_if<step::ExpectReceived>(&st)) {
            known_host(e->host);
            if (e->from) known_host(*e->from);
        } else if (const auto* p = std::get_if<step::ExpectPacketIns>(&st)) {
            known_switch(p->dpid);
        } else if (const auto* f = std::get_if<step::ExpectFlows>(&st)) {
            known_switch(f->dpid);
            for (const auto& fl : f->flows) {
                try {
                    (void)mac_from_string(fl.dl_dst);
                } catch (const std::exception&) {
                    auto it = std::find_if(sc.hosts.begin(), sc.hosts.end(), [&](const HostDecl& h) { return h.name == fl.dl_dst; });
                    if (it == sc.hosts.end()) throw ScenarioError("flow dl_dst '" + fl.dl_dst + "' is neither a MAC nor a host");
                }
            }
        } else if (const auto* k = std::get_if<step::KillSa>(&st)) {
            known_switch(k->dpid);
        } else if (std::holds_alternative<step::ExpectLinks>(st) && !sc.controllets.topology) {
            throw ScenarioError("expect_links needs the topology controllet");
        }
    }
}

}  // namespace

Scenario load_scenario_text(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ScenarioError(std::string("YAML: ") + e.what());
    }
    if (!root.IsMap()) throw ScenarioError("scenario must be a YAML map");
    Scenario sc;
    try {
        sc.name = root["name"] ? root["name"].Scalar() : "unnamed";
        if (root["seed"]) sc.seed = as_u64(root["seed"], "seed");
        for (const auto& s : root["switches"]) {
            SwitchDecl d{as_u64(s["dpid"], "switch dpid"), {}};
            const YAML::Node p = s["ports"];
            if (p && p.IsScalar()) {
                const auto n = as_u64(p, "switch ports");
                for (std::uint16_t i = 1; i <= n; ++i) d.ports.push_back(i);
            } else if (p && p.IsSequence()) {
                for (const auto& x : p) d.ports.push_back(as_port(x, "switch port"));
            } else {
                throw ScenarioError("switch needs ports (count or list)" + where(s));
            }
            sc.switches.push_back(std::move(d));
        }
        if (root["links"]) {
            for (const auto& l : root["links"]) sc.links.push_back(parse_link(l));
        }
        if (root["hosts"]) {
            for (const auto& h : root["hosts"]) {
                HostDecl d{as_string(h["name"], "host name"), {}, as_u64(h["switch"], "host switch"),
                           as_port(h["port"], "host port")};
                try {
                    d.mac = mac_from_string(as_string(h["mac"], "host mac"));
                } catch (const std::invalid_argument& e) {
                    throw ScenarioError("host " + d.name + ": " + e.what());
                }
                sc.hosts.push_back(std::move(d));
            }
        }
        if (const YAML::Node c = root["controllets"]) {
            if (const YAML::Node ls = c["learning_switch"]) {
                sc.controllets.learning_replicas = ls["replicas"] ? static_cast<std::uint32_t>(as_u64(ls["replicas"], "replicas")) : 1;
                if (ls["wildcard"]) sc.controllets.learning_wildcard = ls["wildcard"].as<bool>();
            }
            if (const YAML::Node t = c["topology"]) {
                sc.controllets.topology = true;
                if (t["lldp_period_ms"]) sc.controllets.lldp_period = as_ms(t["lldp_period_ms"], "lldp_period_ms");
            }
        }
        if (root["steps"]) {
            for (const auto& st : root["steps"]) sc.steps.push_back(parse_step(st));
        }
    } catch (const YAML::Exception& e) {
        throw ScenarioError(std::string("YAML: ") + e.what());
    }
    if (sc.switches.empty()) throw ScenarioError("scenario declares no switches");
    if (sc.controllets.learning_replicas > 256) throw ScenarioError("at most 256 learning-switch replicas");
    validate(sc);
    return sc;
}

Scenario load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return load_scenario_text(ss.str());
}

}  // namespace zsdn::harness
