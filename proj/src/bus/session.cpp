#include "zsdn/bus/session.hpp"

#include <algorithm>

namespace zsdn::bus {

using std::chrono::milliseconds;
using SteadyClock = std::chrono::steady_clock;

Session Session::connect(const net::Endpoint& broker, SessionOptions options) {
    try {
        return Session(net::connect_tcp(broker, options.connect_timeout), options);
    } catch (const net::NetError& e) {
        throw SessionError(std::string("cannot reach broker: ") + e.what());
    }
}

Session::Session(net::Fd fd, SessionOptions options)
    : fd_(std::move(fd)), options_(options), last_heartbeat_(SteadyClock::now()) {}

Session::~Session() {
    if (fd_.valid()) {
        try {
            flush();
        } catch (...) {
        }
    }
}

void Session::lost(const std::string& why) {
    fd_.reset();
    registered_ = false;
    throw SessionError(why);
}

void Session::send(const Frame& f) {
    if (!fd_.valid()) throw SessionError("session closed");
    frame_encode_into(out_, f.type, f.body);
    if (out_.size() >= options_.cork_limit) flush();
}

void Session::flush() {
    if (out_.empty()) return;
    if (!fd_.valid()) throw SessionError("session closed");
    try {
        net::write_all(fd_.get(), out_);
    } catch (const net::NetError& e) {
        out_.clear();
        lost(std::string("broker connection lost: ") + e.what());
    }
    out_.clear();
}

void Session::heartbeat_if_due() {
    if (!fd_.valid()) return;
    // Sent on a fixed cadence; other traffic does not count as liveness.
    if (SteadyClock::now() >= next_heartbeat()) {
        frame_encode_into(out_, FrameType::Heartbeat, {});
        last_heartbeat_ = SteadyClock::now();
        flush();
    }
}

void Session::dispatch(Frame frame) {
    switch (frame.type) {
        case FrameType::Event: {
            PublishBody p = parse_publish(frame.body);
            inbox_.emplace_back(Event{std::move(p.topic), std::move(p.payload)});
            break;
        }
        case FrameType::Request: {
            RequestBody r = parse_request(frame.body);
            inbox_.emplace_back(IncomingRequest{r.peer, r.req_id, std::move(r.payload)});
            break;
        }
        case FrameType::Reply:
            replies_.push_back(parse_reply(frame.body));
            break;
        case FrameType::RegisterAck:
            ack_ = parse_register_ack(frame.body);
            break;
        default:
            throw ProtocolError(std::string("unexpected frame from broker: ") + frame_type_name(frame.type));
    }
}

bool Session::pump(milliseconds timeout) {
    if (!fd_.valid()) throw SessionError("session closed");
    heartbeat_if_due();
    flush();
    const auto hb_wait = std::chrono::duration_cast<milliseconds>(next_heartbeat() - SteadyClock::now());
    const milliseconds wait = std::max(milliseconds(0), std::min(timeout, hb_wait));
    bool readable;
    try {
        readable = net::wait_readable(fd_.get(), wait);
    } catch (const net::NetError& e) {
        lost(e.what());
    }
    if (!readable) return false;
    long n;
    try {
        n = net::read_some(fd_.get(), reader_.buffer());
    } catch (const net::NetError& e) {
        lost(std::string("broker connection lost: ") + e.what());
    }
    if (n == 0) lost("broker closed the connection");
    try {
        while (auto f = reader_.next()) dispatch(std::move(*f));
    } catch (const ProtocolError& e) {
        lost(std::string("protocol error: ") + e.what());
    }
    return true;
}

std::uint8_t Session::register_controllet(const RegisterBody& descriptor) {
    ack_.reset();
    send(make_register(descriptor));
    const auto deadline = SteadyClock::now() + options_.request_timeout;
    while (!ack_) {
        const auto left = std::chrono::ceil<milliseconds>(deadline - SteadyClock::now());
        if (left.count() <= 0) throw RequestTimeout("no REGISTER_ACK from broker");
        pump(left);
    }
    registered_ = *ack_ == status::kOk;
    return *ack_;
}

void Session::subscribe(const topic::SubscriptionPattern& pattern) { send(make_subscribe(pattern, true)); }

void Session::unsubscribe(const topic::SubscriptionPattern& pattern) { send(make_subscribe(pattern, false)); }

void Session::publish(const topic::Topic& topic, ByteView payload) {
    if (!fd_.valid()) throw SessionError("session closed");
    encode_publish_into(out_, FrameType::Publish, topic.bytes(), payload);
    if (out_.size() >= options_.cork_limit) flush();
}

Reply Session::request(std::uint64_t target, ByteView payload, std::optional<milliseconds> timeout) {
    const std::uint32_t id = next_req_id_++;
    if (next_req_id_ == 0) next_req_id_ = 1;
    send(make_request(target, id, payload));
    const auto deadline = SteadyClock::now() + timeout.value_or(options_.request_timeout);
    while (true) {
        auto it = std::find_if(replies_.begin(), replies_.end(), [id](const ReplyBody& r) { return r.req_id == id; });
        if (it != replies_.end()) {
            Reply r{it->status, std::move(it->payload)};
            replies_.erase(it);
            return r;
        }
        // Replies to requests that already timed out are stale.
        replies_.clear();
        const auto left = std::chrono::ceil<milliseconds>(deadline - SteadyClock::now());
        if (left.count() <= 0) throw RequestTimeout("request " + std::to_string(id) + " timed out");
        pump(left);
    }
}

void Session::reply(const IncomingRequest& req, std::uint8_t st, ByteView payload) {
    send(make_reply(req.req_id, st, payload));
}

std::optional<Inbound> Session::next_event(milliseconds timeout) {
    const auto deadline = SteadyClock::now() + timeout;
    while (inbox_.empty()) {
        const auto left = std::chrono::ceil<milliseconds>(deadline - SteadyClock::now());
        pump(std::max(milliseconds(0), left));
        if (!inbox_.empty() || SteadyClock::now() >= deadline) break;
    }
    if (inbox_.empty()) return std::nullopt;
    Inbound item = std::move(inbox_.front());
    inbox_.pop_front();
    return item;
}

void Session::bye() {
    if (!fd_.valid()) return;
    try {
        send(make_empty(FrameType::Bye));
        flush();
    } catch (const SessionError&) {
    }
    fd_.reset();
    registered_ = false;
}

void Session::abort() {
    out_.clear();
    fd_.reset();
    registered_ = false;
}

}  // namespace zsdn::bus
