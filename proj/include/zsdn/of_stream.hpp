#pragma once

#include <chrono>
#include <optional>

#include "zsdn/net.hpp"
#include "zsdn/ofcodec.hpp"

namespace zsdn::of {

/// An OpenFlow byte stream over a TCP socket with write batching.
class Connection {
public:
    Connection() = default;
    explicit Connection(net::Fd fd) : fd_(std::move(fd)) {}

    int fd() const { return fd_.get(); }
    bool open() const { return fd_.valid(); }
    void close() { fd_.reset(); }
    /// shutdown(2) without releasing the descriptor; safe from another thread.
    void shutdown();

    /// Queues a message; flush() writes everything queued.
    void queue(const Message& msg);
    void queue_raw(ByteView bytes);
    void flush();
    void send(const Message& msg) { queue(msg); flush(); }

    /// Reads whatever is available, waiting up to `timeout`. Returns false
    /// when the peer closed the connection.
    bool fill(std::chrono::milliseconds timeout);
    /// Next complete raw message from the buffered input.
    std::optional<Bytes> next() { return reader_.next(); }

    /// Blocks until one full message arrives. Returns nullopt on timeout;
    /// throws net::NetError if the peer disconnects.
    std::optional<Bytes> receive(std::chrono::milliseconds timeout);

private:
    net::Fd fd_;
    StreamReader reader_;
    Bytes out_;
    Bytes scratch_;
};

}  // namespace zsdn::of
