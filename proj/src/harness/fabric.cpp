#include "zsdn/harness/fabric.hpp"

#include <stdexcept>
#include <thread>

#include "zsdn/frame.hpp"

namespace zsdn::harness {

using std::chrono::milliseconds;

Fabric::Fabric() : activity_(std::make_shared<Activity>()) {}

Fabric::~Fabric() { stop(); }

MockSwitch& Fabric::add_switch(std::uint64_t dpid, std::vector<std::uint16_t> ports) {
    if (switches_.contains(dpid)) throw std::invalid_argument("duplicate switch");
    auto sw = std::make_unique<MockSwitch>(
        dpid, std::move(ports), [this](std::uint64_t d, std::uint16_t p, Bytes f) { deliver(d, p, std::move(f)); },
        activity_);
    return *switches_.emplace(dpid, std::move(sw)).first->second;
}

void Fabric::add_link(std::uint64_t a, std::uint16_t pa, std::uint64_t b, std::uint16_t pb) {
    if (wiring_.contains({a, pa}) || wiring_.contains({b, pb})) throw std::invalid_argument("port already wired");
    wiring_[{a, pa}] = Peer{false, b, pb, {}};
    wiring_[{b, pb}] = Peer{false, a, pa, {}};
}

void Fabric::add_host(HostSpec host) {
    if (hosts_.contains(host.name)) throw std::invalid_argument("duplicate host " + host.name);
    if (wiring_.contains({host.dpid, host.port})) throw std::invalid_argument("port already wired");
    wiring_[{host.dpid, host.port}] = Peer{true, 0, 0, host.name};
    rx_[host.name];
    hosts_.emplace(host.name, std::move(host));
}

MockSwitch& Fabric::at(std::uint64_t dpid) {
    auto it = switches_.find(dpid);
    if (it == switches_.end()) throw std::out_of_range("unknown switch");
    return *it->second;
}

const HostSpec& Fabric::host(const std::string& name) const {
    auto it = hosts_.find(name);
    if (it == hosts_.end()) throw std::out_of_range("unknown host " + name);
    return it->second;
}

void Fabric::send(const std::string& from, const std::string& to) {
    send_frame(from, of::build_udp_frame(host(from).mac, host(to).mac));
}

void Fabric::send_frame(const std::string& from, Bytes frame) {
    const HostSpec& h = host(from);
    at(h.dpid).inject(h.port, std::move(frame));
}

std::vector<Received> Fabric::received(const std::string& host) const {
    std::lock_guard lock(rx_mutex_);
    auto it = rx_.find(host);
    return it == rx_.end() ? std::vector<Received>{} : it->second;
}

void Fabric::deliver(std::uint64_t dpid, std::uint16_t port, Bytes frame) {
    auto it = wiring_.find({dpid, port});
    if (it == wiring_.end()) {
        ++dropped_;
        return;
    }
    const Peer& peer = it->second;
    if (!peer.is_host) {
        switches_.at(peer.dpid)->inject(peer.port, std::move(frame));
        return;
    }
    Received r;
    if (frame.size() >= of::kEthernetHeaderLength) {
        const of::FrameClass fc = of::classify_frame(frame);
        r = Received{fc.eth_src, fc.eth_dst, fc.ethertype};
    }
    std::lock_guard lock(rx_mutex_);
    rx_[peer.host].push_back(r);
    ++activity_->generation;
}

bool Fabric::wait_quiescent(milliseconds timeout, milliseconds settle) {
    const auto deadline = Clock::now() + timeout;
    auto idle = [&] { return activity_->queued.load() <= 0 && activity_->outstanding.load() <= 0; };
    while (Clock::now() < deadline) {
        if (idle()) {
            const auto gen = activity_->generation.load();
            std::this_thread::sleep_for(settle);
            if (idle() && gen == activity_->generation.load()) return true;
        } else {
            std::this_thread::sleep_for(milliseconds(2));
        }
    }
    return false;
}

void Fabric::stop() {
    for (auto& [dpid, sw] : switches_) sw->stop();
}

}  // namespace zsdn::harness
