#include "zsdn/net.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/eventfd.h>
#include <sys/socket.h>
#include <unistd.h>

namespace zsdn::net {

namespace {

[[noreturn]] void fail(const std::string& what) { throw NetError(what + ": " + std::strerror(errno)); }

sockaddr_in resolve(const Endpoint& ep) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(ep.port);
    if (ep.host.empty() || ep.host == "*") {
        addr.sin_addr.s_addr = htonl(INADDR_ANY);
        return addr;
    }
    if (inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) == 1) return addr;
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (getaddrinfo(ep.host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
        throw NetError("cannot resolve host '" + ep.host + "'");
    }
    addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
    freeaddrinfo(res);
    return addr;
}

}  // namespace

Endpoint Endpoint::parse(std::string_view text) {
    Endpoint ep;
    const auto colon = text.rfind(':');
    std::string_view port_text = text;
    if (colon != std::string_view::npos) {
        ep.host = std::string(text.substr(0, colon));
        port_text = text.substr(colon + 1);
    }
    if (port_text.empty()) throw std::invalid_argument("missing port in address '" + std::string(text) + "'");
    unsigned long port = 0;
    for (char c : port_text) {
        if (c < '0' || c > '9') throw std::invalid_argument("bad port in address '" + std::string(text) + "'");
        port = port * 10 + static_cast<unsigned long>(c - '0');
        if (port > 65535) throw std::invalid_argument("port out of range in '" + std::string(text) + "'");
    }
    ep.port = static_cast<std::uint16_t>(port);
    return ep;
}

Fd& Fd::operator=(Fd&& o) noexcept {
    if (this != &o) reset(o.release());
    return *this;
}

void Fd::reset(int fd) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = fd;
}

Fd listen_tcp(const Endpoint& ep, int backlog) {
    Fd fd(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!fd.valid()) fail("socket");
    int one = 1;
    ::setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr = resolve(ep);
    if (::bind(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) fail("bind " + ep.to_string());
    if (::listen(fd.get(), backlog) != 0) fail("listen");
    return fd;
}

std::uint16_t local_port(int fd) {
    sockaddr_in addr{};
    socklen_t len = sizeof addr;
    if (::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) != 0) fail("getsockname");
    return ntohs(addr.sin_port);
}

void set_nonblocking(int fd, bool on) {
    int flags = ::fcntl(fd, F_GETFL, 0);
    if (flags < 0) fail("fcntl");
    flags = on ? (flags | O_NONBLOCK) : (flags & ~O_NONBLOCK);
    if (::fcntl(fd, F_SETFL, flags) != 0) fail("fcntl");
}

void set_nodelay(int fd) {
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

Fd connect_tcp(const Endpoint& ep, std::chrono::milliseconds timeout) {
    Fd fd(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!fd.valid()) fail("socket");
    sockaddr_in addr = resolve(ep);
    set_nonblocking(fd.get(), true);
    int rc = ::connect(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof addr);
    if (rc != 0) {
        if (errno != EINPROGRESS) fail("connect " + ep.to_string());
        pollfd p{fd.get(), POLLOUT, 0};
        rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
        if (rc == 0) throw NetError("connect " + ep.to_string() + ": timed out");
        if (rc < 0) fail("poll");
        int err = 0;
        socklen_t len = sizeof err;
        ::getsockopt(fd.get(), SOL_SOCKET, SO_ERROR, &err, &len);
        if (err != 0) {
            errno = err;
            fail("connect " + ep.to_string());
        }
    }
    set_nonblocking(fd.get(), false);
    set_nodelay(fd.get());
    return fd;
}

Fd accept_tcp(int listen_fd, std::chrono::milliseconds timeout) {
    if (timeout.count() >= 0 && !wait_readable(listen_fd, timeout)) return Fd{};
    Fd fd(::accept4(listen_fd, nullptr, nullptr, SOCK_CLOEXEC));
    if (!fd.valid()) {
        if (errno == EAGAIN || errno == EINTR) return Fd{};
        fail("accept");
    }
    set_nodelay(fd.get());
    return fd;
}

void write_all(int fd, ByteView data) {
    std::size_t sent = 0;
    while (sent < data.size()) {
        ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            if (errno == EAGAIN) {
                pollfd p{fd, POLLOUT, 0};
                ::poll(&p, 1, 1000);
                continue;
            }
            fail("send");
        }
        sent += static_cast<std::size_t>(n);
    }
}

long read_some(int fd, Bytes& out, std::size_t max) {
    const std::size_t old = out.size();
    out.resize(old + max);
    ssize_t n;
    do {
        n = ::recv(fd, out.data() + old, max, 0);
    } while (n < 0 && errno == EINTR);
    if (n < 0) {
        out.resize(old);
        if (errno == EAGAIN) return -1;
        if (errno == ECONNRESET) return 0;
        fail("recv");
    }
    out.resize(old + static_cast<std::size_t>(n));
    return n;
}

bool wait_readable(int fd, std::chrono::milliseconds timeout) {
    pollfd p{fd, POLLIN, 0};
    int rc;
    do {
        rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
    } while (rc < 0 && errno == EINTR);
    if (rc < 0) fail("poll");
    return rc > 0;
}

Waker::Waker() : fd_(::eventfd(0, EFD_NONBLOCK | EFD_CLOEXEC)) {
    if (!fd_.valid()) fail("eventfd");
}

void Waker::notify() const {
    std::uint64_t one = 1;
    [[maybe_unused]] auto rc = ::write(fd_.get(), &one, sizeof one);
}

void Waker::drain() const {
    std::uint64_t v;
    [[maybe_unused]] auto rc = ::read(fd_.get(), &v, sizeof v);
}

}  // namespace zsdn::net
