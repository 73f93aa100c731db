#pragma once

// Thin RAII wrappers over POSIX TCP sockets.

#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "zsdn/bytes.hpp"

namespace zsdn::net {

class NetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Endpoint {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;

    /// "host:port"; a bare port means 127.0.0.1.
    static Endpoint parse(std::string_view text);
    std::string to_string() const { return host + ":" + std::to_string(port); }
    friend bool operator==(const Endpoint&, const Endpoint&) = default;
};

class Fd {
public:
    Fd() = default;
    explicit Fd(int fd) : fd_(fd) {}
    Fd(Fd&& o) noexcept : fd_(o.release()) {}
    Fd& operator=(Fd&& o) noexcept;
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    ~Fd() { reset(); }

    int get() const { return fd_; }
    bool valid() const { return fd_ >= 0; }
    int release() { int f = fd_; fd_ = -1; return f; }
    void reset(int fd = -1);

private:
    int fd_ = -1;
};

/// Listening socket bound to the endpoint; port 0 picks an ephemeral port.
Fd listen_tcp(const Endpoint& ep, int backlog = 64);
std::uint16_t local_port(int fd);

/// Blocking connect with a timeout; sets TCP_NODELAY.
Fd connect_tcp(const Endpoint& ep, std::chrono::milliseconds timeout);

/// Accepts one connection, waiting at most `timeout` (negative = forever).
/// Returns an invalid Fd on timeout.
Fd accept_tcp(int listen_fd, std::chrono::milliseconds timeout);

void set_nonblocking(int fd, bool on);
void set_nodelay(int fd);

/// Writes all bytes (blocking socket). Throws NetError on failure.
void write_all(int fd, ByteView data);

/// One recv() into `out` (appends). Returns bytes read, 0 on orderly close.
/// Throws NetError on hard errors; returns -1 on EAGAIN.
long read_some(int fd, Bytes& out, std::size_t max = 256 * 1024);

/// poll() a single fd for readability. Returns true if readable or hung up.
bool wait_readable(int fd, std::chrono::milliseconds timeout);

/// eventfd used to wake poll loops from other threads.
class Waker {
public:
    Waker();
    void notify() const;
    void drain() const;
    int fd() const { return fd_.get(); }

private:
    Fd fd_;
};

}  // namespace zsdn::net
