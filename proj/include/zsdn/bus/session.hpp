#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <variant>

#include "zsdn/bus/frame.hpp"
#include "zsdn/net.hpp"

namespace zsdn::bus {

/// Broker connection lost or protocol violated; the session is unusable.
class SessionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class RequestTimeout : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SessionOptions {
    std::chrono::milliseconds connect_timeout{2000};
    std::chrono::milliseconds heartbeat_interval = timing::kHeartbeatInterval;
    std::chrono::milliseconds request_timeout = timing::kRequestTimeout;
    /// Unflushed output above this size is written immediately.
    std::size_t cork_limit = 64 * 1024;
};

struct Event {
    topic::Topic topic;
    Bytes payload;
};

struct IncomingRequest {
    std::uint64_t origin = 0;
    std::uint32_t req_id = 0;
    Bytes payload;
};

using Inbound = std::variant<Event, IncomingRequest>;

struct Reply {
    std::uint8_t status = status::kOk;
    Bytes payload;
};

/// Client side of the bus protocol. Not thread-safe: one session per
/// execution context. Output is corked and flushed before any blocking
/// wait, so publish() never blocks on the network unless the cork fills.
/// Heartbeats go out automatically whenever the session is driven.
class Session {
public:
    static Session connect(const net::Endpoint& broker, SessionOptions options = {});

    Session(Session&&) noexcept = default;
    Session& operator=(Session&&) noexcept = default;
    ~Session();

    /// Registers and waits for REGISTER_ACK; returns its status.
    std::uint8_t register_controllet(const RegisterBody& descriptor);
    bool registered() const { return registered_; }

    void subscribe(const topic::SubscriptionPattern& pattern);
    void unsubscribe(const topic::SubscriptionPattern& pattern);
    void publish(const topic::Topic& topic, ByteView payload);

    /// Throws RequestTimeout or SessionError. Events that arrive while
    /// waiting are queued for next_event().
    Reply request(std::uint64_t target, ByteView payload, std::optional<std::chrono::milliseconds> timeout = {});
    void reply(const IncomingRequest& req, std::uint8_t status, ByteView payload);

    /// Next inbound item in arrival order, waiting up to `timeout`.
    std::optional<Inbound> next_event(std::chrono::milliseconds timeout);

    /// Sends BYE and closes.
    void bye();
    /// Closes without BYE.
    void abort();

    void flush();
    void heartbeat_if_due();
    /// Inbound items already read and queued (e.g. during request()).
    bool has_inbound() const { return !inbox_.empty(); }
    int fd() const { return fd_.get(); }
    bool connected() const { return fd_.valid(); }
    std::chrono::steady_clock::time_point next_heartbeat() const { return last_heartbeat_ + options_.heartbeat_interval; }

private:
    Session(net::Fd fd, SessionOptions options);
    void send(const Frame& f);
    /// Reads once (waiting up to timeout) and moves parsed frames to the
    /// inbound queue. Returns false on timeout.
    bool pump(std::chrono::milliseconds timeout);
    void dispatch(Frame frame);
    [[noreturn]] void lost(const std::string& why);

    net::Fd fd_;
    SessionOptions options_;
    FrameReader reader_;
    Bytes out_;
    std::deque<Inbound> inbox_;
    std::deque<ReplyBody> replies_;
    std::optional<std::uint8_t> ack_;
    std::uint32_t next_req_id_ = 1;
    std::chrono::steady_clock::time_point last_heartbeat_;
    bool registered_ = false;
};

}  // namespace zsdn::bus
