#include "zsdn/harness/mock_switch.hpp"

#include <poll.h>

#include <spdlog/spdlog.h>

#include "zsdn/frame.hpp"

namespace zsdn::harness {

using std::chrono::milliseconds;

SwitchCore::SwitchCore(std::uint64_t dpid, std::vector<std::uint16_t> ports) : dpid_(dpid), ports_(std::move(ports)) {}

of::FeaturesReply SwitchCore::features(std::uint32_t xid) const {
    of::FeaturesReply fr;
    fr.xid = xid;
    fr.datapath_id = dpid_;
    fr.n_buffers = 0;
    fr.n_tables = 1;
    fr.actions = 1;
    for (std::uint16_t p : ports_) {
        of::PortDesc d;
        d.port_no = p;
        d.hw_addr = MacAddr{0x02, static_cast<std::uint8_t>(dpid_ >> 24), static_cast<std::uint8_t>(dpid_ >> 16),
                            static_cast<std::uint8_t>(dpid_ >> 8), static_cast<std::uint8_t>(dpid_),
                            static_cast<std::uint8_t>(p)};
        d.set_name("s" + std::to_string(dpid_) + "-eth" + std::to_string(p));
        fr.ports.push_back(d);
    }
    return fr;
}

void SwitchCore::execute(const std::vector<of::Action>& actions, std::uint16_t in_port, ByteView frame,
                         CoreOutput& out) {
    const std::size_t before = out.emitted.size();
    for (const auto& a : actions) {
        const auto* o = std::get_if<of::OutputAction>(&a);
        if (!o) {
            ++counters_.errors;
            continue;
        }
        const Bytes copy(frame.begin(), frame.end());
        if (o->port == of::port::kFlood || o->port == of::port::kAll) {
            for (std::uint16_t p : ports_) {
                if (p != in_port) out.emitted.push_back(Emission{p, copy});
            }
        } else if (o->port == of::port::kInPort) {
            out.emitted.push_back(Emission{in_port, copy});
        } else if (o->port == of::port::kController) {
            of::PacketIn pin;
            pin.xid = next_xid_++;
            pin.total_len = static_cast<std::uint16_t>(frame.size());
            pin.in_port = in_port;
            pin.reason = 1;
            pin.frame = copy;
            out.to_controller.emplace_back(std::move(pin));
        } else if (o->port != in_port && std::find(ports_.begin(), ports_.end(), o->port) != ports_.end()) {
            out.emitted.push_back(Emission{o->port, copy});
        }
    }
    if (out.emitted.size() == before) ++counters_.drops;
    counters_.forwarded += out.emitted.size() - before;
}

CoreOutput SwitchCore::receive_frame(std::uint16_t in_port, ByteView frame, Clock::time_point now) {
    CoreOutput out;
    ++counters_.frames_in;
    const auto fields = extract_fields(in_port, frame);
    if (!fields) {
        ++counters_.drops;
        return out;
    }
    if (const FlowEntry* e = table_.lookup(*fields, now)) {
        const auto actions = e->actions;
        execute(actions, in_port, frame, out);
        return out;
    }
    of::PacketIn pin;
    pin.xid = next_xid_++;
    pin.buffer_id = of::kNoBuffer;
    pin.total_len = static_cast<std::uint16_t>(frame.size());
    pin.in_port = in_port;
    pin.reason = 0;
    pin.frame.assign(frame.begin(), frame.end());
    if (fields->dl_type == of::kEthertypeLldp) {
        ++counters_.lldp_packet_ins;
    } else {
        ++counters_.packet_ins;
    }
    out.to_controller.emplace_back(std::move(pin));
    return out;
}

CoreOutput SwitchCore::handle_controller(const of::Message& msg, Clock::time_point now) {
    CoreOutput out;
    if (const auto* fm = std::get_if<of::FlowMod>(&msg)) {
        ++counters_.flow_mods;
        if (table_.apply(*fm, now) != FlowModResult::Applied) ++counters_.errors;
    } else if (const auto* po = std::get_if<of::PacketOut>(&msg)) {
        ++counters_.packet_outs;
        if (po->buffer_id != of::kNoBuffer) {
            ++counters_.errors;
            return out;
        }
        execute(po->actions, po->in_port, po->frame, out);
    } else if (const auto* echo = std::get_if<of::EchoRequest>(&msg)) {
        out.to_controller.emplace_back(of::EchoReply{echo->xid, echo->data});
    } else if (const auto* freq = std::get_if<of::FeaturesRequest>(&msg)) {
        out.to_controller.emplace_back(features(freq->xid));
    }
    return out;
}

void switch_handshake(of::Connection& conn, const SwitchCore& core, milliseconds timeout) {
    const auto deadline = Clock::now() + timeout;
    conn.send(of::Hello{1, {}});
    while (true) {
        const auto left = std::chrono::ceil<milliseconds>(deadline - Clock::now());
        if (left.count() <= 0) throw net::NetError("switch handshake timed out");
        auto raw = conn.receive(left);
        if (!raw) throw net::NetError("switch handshake timed out");
        const of::Message msg = of::decode(*raw);
        if (const auto* freq = std::get_if<of::FeaturesRequest>(&msg)) {
            conn.send(core.features(freq->xid));
            return;
        }
        if (const auto* echo = std::get_if<of::EchoRequest>(&msg)) conn.send(of::EchoReply{echo->xid, echo->data});
    }
}

MockSwitch::MockSwitch(std::uint64_t dpid, std::vector<std::uint16_t> ports, FrameSink sink,
                       std::shared_ptr<Activity> activity)
    : dpid_(dpid),
      sink_(std::move(sink)),
      activity_(activity ? std::move(activity) : std::make_shared<Activity>()),
      core_(dpid, std::move(ports)) {}

MockSwitch::~MockSwitch() { stop(); }

void MockSwitch::connect(const net::Endpoint& controller, milliseconds timeout) {
    conn_ = of::Connection(net::connect_tcp(controller, timeout));
    switch_handshake(conn_, core_, timeout);
    connected_ = true;
    thread_ = std::thread([this] { loop(); });
}

void MockSwitch::inject(std::uint16_t in_port, Bytes frame) {
    {
        std::lock_guard lock(mutex_);
        inbox_.emplace_back(in_port, std::move(frame));
    }
    ++activity_->queued;
    ++activity_->generation;
    waker_.notify();
}

void MockSwitch::stop() {
    stopping_ = true;
    waker_.notify();
    if (thread_.joinable()) thread_.join();
    std::lock_guard lock(mutex_);
    activity_->outstanding -= static_cast<std::int64_t>(pending_xids_.size());
    pending_xids_.clear();
    activity_->queued -= static_cast<std::int64_t>(inbox_.size());
    inbox_.clear();
}

SwitchCounters MockSwitch::counters() const {
    std::lock_guard lock(mutex_);
    return core_.counters();
}

std::vector<FlowSummary> MockSwitch::flows() const {
    std::lock_guard lock(mutex_);
    std::vector<FlowSummary> out;
    for (const auto& e : core_.flows().entries()) out.push_back(FlowSummary{e.priority, e.match, e.actions, e.idle_timeout});
    return out;
}

std::vector<Emission> MockSwitch::apply(CoreOutput out) {
    for (const auto& m : out.to_controller) {
        if (const auto* pin = std::get_if<of::PacketIn>(&m)) {
            if (pin->reason == 0 && of::classify_frame(pin->frame).ethertype != of::kEthertypeLldp) {
                pending_xids_.insert(pin->xid);
                ++activity_->outstanding;
            }
        }
        conn_.queue(m);
    }
    return std::move(out.emitted);
}

void MockSwitch::emit(std::vector<Emission> emitted) {
    if (!sink_) return;
    for (auto& e : emitted) sink_(dpid_, e.port, std::move(e.frame));
}

void MockSwitch::on_controller(ByteView raw) {
    of::Message msg;
    try {
        msg = of::decode(raw);
    } catch (const of::DecodeError& e) {
        spdlog::warn("mock switch {:x}: bad message from controller: {}", dpid_, e.what());
        return;
    }
    std::vector<Emission> emitted;
    bool answered = false;
    {
        std::lock_guard lock(mutex_);
        emitted = apply(core_.handle_controller(msg, Clock::now()));
        const std::uint8_t type = of::type_of(msg);
        if (type == static_cast<std::uint8_t>(of::MsgType::PacketOut) ||
            type == static_cast<std::uint8_t>(of::MsgType::FlowMod)) {
            answered = pending_xids_.erase(of::xid_of(msg)) > 0;
        }
    }
    emit(std::move(emitted));
    if (answered) {
        --activity_->outstanding;
        ++activity_->generation;
    }
}

void MockSwitch::loop() {
    while (!stopping_) {
        try {
            conn_.flush();
        } catch (const net::NetError& e) {
            spdlog::info("mock switch {:x}: controller connection lost: {}", dpid_, e.what());
            break;
        }
        pollfd p[2] = {{conn_.fd(), POLLIN, 0}, {waker_.fd(), POLLIN, 0}};
        ::poll(p, 2, 100);
        if (p[1].revents) waker_.drain();
        if (stopping_) break;
        if (p[0].revents) {
            bool open = true;
            try {
                open = conn_.fill(milliseconds(0));
                while (auto raw = conn_.next()) on_controller(*raw);
            } catch (const std::exception& e) {
                spdlog::warn("mock switch {:x}: {}", dpid_, e.what());
                open = false;
            }
            if (!open) {
                spdlog::info("mock switch {:x}: controller closed the connection", dpid_);
                break;
            }
        }
        while (true) {
            std::vector<Emission> emitted;
            {
                std::lock_guard lock(mutex_);
                if (inbox_.empty()) break;
                auto item = std::move(inbox_.front());
                inbox_.pop_front();
                emitted = apply(core_.receive_frame(item.first, item.second, Clock::now()));
            }
            emit(std::move(emitted));
            --activity_->queued;
            ++activity_->generation;
        }
    }
    connected_ = false;
    conn_.shutdown();
}

}  // namespace zsdn::harness
