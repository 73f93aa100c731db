#include "zsdn/of_stream.hpp"

#include <sys/socket.h>

namespace zsdn::of {

void Connection::shutdown() {
    if (fd_.valid()) ::shutdown(fd_.get(), SHUT_RDWR);
}

void Connection::queue(const Message& msg) {
    Bytes b = encode(msg);
    out_.insert(out_.end(), b.begin(), b.end());
}

void Connection::queue_raw(ByteView bytes) { out_.insert(out_.end(), bytes.begin(), bytes.end()); }

void Connection::flush() {
    if (out_.empty()) return;
    if (!fd_.valid()) {
        out_.clear();
        throw net::NetError("OpenFlow connection closed");
    }
    Bytes pending;
    pending.swap(out_);
    net::write_all(fd_.get(), pending);
}

bool Connection::fill(std::chrono::milliseconds timeout) {
    if (!fd_.valid()) return false;
    if (!net::wait_readable(fd_.get(), timeout)) return true;
    scratch_.clear();
    long n = net::read_some(fd_.get(), scratch_);
    if (n == 0) return false;
    if (n > 0) reader_.feed(scratch_);
    return true;
}

std::optional<Bytes> Connection::receive(std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (true) {
        if (auto m = reader_.next()) return m;
        const auto left = std::chrono::ceil<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) return std::nullopt;
        if (!fill(left)) throw net::NetError("OpenFlow peer closed the connection");
    }
}

}  // namespace zsdn::of
