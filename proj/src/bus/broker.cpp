#include "zsdn/bus/broker.hpp"

#include <sys/epoll.h>
#include <sys/socket.h>

#include <cerrno>
#include <map>
#include <unordered_map>

#include <spdlog/spdlog.h>

namespace zsdn::bus {

namespace {
constexpr std::uint64_t kListenTag = 0;
constexpr std::uint64_t kWakeTag = 1;
constexpr ConnId kFirstConn = 2;
constexpr std::size_t kReadBudget = 1024 * 1024;
}  // namespace

struct Broker::Impl {
    struct Conn {
        net::Fd fd;
        FrameReader reader;
        Bytes out;
        std::size_t out_sent = 0;
        bool want_write = false;
        bool closing = false;
    };

    BrokerOptions options;
    net::Fd listen_fd;
    net::Fd epoll_fd;
    net::Waker waker;
    std::atomic<bool> stopping{false};
    BrokerState state;
    std::unordered_map<ConnId, Conn> conns;
    std::vector<ConnId> dirty;
    ConnId next_conn = kFirstConn;

    std::atomic<std::uint64_t> frames_in{0};
    std::atomic<std::uint64_t> frames_out{0};
    std::atomic<std::uint64_t> dropped{0};
    std::atomic<std::uint64_t> connections{0};

    void ctl(int op, int fd, std::uint32_t events, std::uint64_t tag) {
        epoll_event ev{};
        ev.events = events;
        ev.data.u64 = tag;
        if (::epoll_ctl(epoll_fd.get(), op, fd, &ev) != 0 && op != EPOLL_CTL_DEL) {
            throw net::NetError("epoll_ctl failed");
        }
    }

    void accept_all() {
        while (true) {
            net::Fd fd = net::accept_tcp(listen_fd.get(), std::chrono::milliseconds(0));
            if (!fd.valid()) return;
            net::set_nonblocking(fd.get(), true);
            const ConnId id = next_conn++;
            ctl(EPOLL_CTL_ADD, fd.get(), EPOLLIN, id);
            Conn c;
            c.fd = std::move(fd);
            conns.emplace(id, std::move(c));
            ++connections;
        }
    }

    void apply(const Transition& t) {
        for (const auto& o : t.out) {
            auto it = conns.find(o.conn);
            if (it == conns.end() || it->second.closing) continue;
            Conn& c = it->second;
            if (c.out.size() - c.out_sent > options.max_backlog) {
                ++dropped;
                continue;
            }
            if (c.out.size() == c.out_sent) dirty.push_back(o.conn);
            frame_encode_into(c.out, o.frame.type, o.frame.body);
            ++frames_out;
        }
        for (ConnId id : t.close) {
            auto it = conns.find(id);
            if (it == conns.end() || it->second.closing) continue;
            it->second.closing = true;
            dirty.push_back(id);
        }
    }

    void close_conn(ConnId id) {
        auto it = conns.find(id);
        if (it == conns.end()) return;
        ctl(EPOLL_CTL_DEL, it->second.fd.get(), 0, id);
        ::shutdown(it->second.fd.get(), SHUT_RDWR);
        conns.erase(it);
        connections--;
        apply(broker_disconnect(state, id));
    }

    void read_conn(ConnId id) {
        auto it = conns.find(id);
        if (it == conns.end() || it->second.closing) return;
        Conn& c = it->second;
        std::size_t budget = kReadBudget;
        bool eof = false;
        while (budget > 0) {
            long n;
            try {
                n = net::read_some(c.fd.get(), c.reader.buffer(), 128 * 1024);
            } catch (const net::NetError&) {
                n = 0;
            }
            if (n < 0) break;
            if (n == 0) {
                eof = true;
                break;
            }
            budget -= std::min<std::size_t>(budget, static_cast<std::size_t>(n));
        }
        const TimePoint now = Clock::now();
        try {
            while (auto frame = c.reader.next()) {
                ++frames_in;
                apply(broker_handle(state, id, *frame, now));
                if (c.closing) break;
            }
        } catch (const ProtocolError& e) {
            spdlog::warn("broker: connection {} protocol error: {}", id, e.what());
            Transition t;
            t.close.push_back(id);
            apply(t);
        }
        if (eof) close_conn(id);
    }

    void flush_conn(ConnId id) {
        auto it = conns.find(id);
        if (it == conns.end()) return;
        Conn& c = it->second;
        while (c.out_sent < c.out.size()) {
            ssize_t n = ::send(c.fd.get(), c.out.data() + c.out_sent, c.out.size() - c.out_sent, MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR) continue;
                if (errno == EAGAIN) break;
                c.out.clear();
                c.out_sent = 0;
                close_conn(id);
                return;
            }
            c.out_sent += static_cast<std::size_t>(n);
        }
        if (c.out_sent == c.out.size()) {
            c.out.clear();
            c.out_sent = 0;
            if (c.closing) {
                close_conn(id);
                return;
            }
            if (c.want_write) {
                c.want_write = false;
                ctl(EPOLL_CTL_MOD, c.fd.get(), EPOLLIN, id);
            }
        } else {
            if (c.out_sent > 1024 * 1024) {
                c.out.erase(c.out.begin(), c.out.begin() + static_cast<std::ptrdiff_t>(c.out_sent));
                c.out_sent = 0;
            }
            if (!c.want_write) {
                c.want_write = true;
                ctl(EPOLL_CTL_MOD, c.fd.get(), EPOLLIN | EPOLLOUT, id);
            }
        }
    }

    void flush_dirty() {
        // close_conn may append more dirty entries while we iterate.
        for (std::size_t i = 0; i < dirty.size(); ++i) flush_conn(dirty[i]);
        dirty.clear();
    }
};

Broker::Broker(BrokerOptions options) : options_(std::move(options)), impl_(std::make_unique<Impl>()) {
    impl_->options = options_;
    impl_->listen_fd = net::listen_tcp(options_.listen);
    net::set_nonblocking(impl_->listen_fd.get(), true);
    port_ = net::local_port(impl_->listen_fd.get());
    impl_->epoll_fd = net::Fd(::epoll_create1(EPOLL_CLOEXEC));
    if (!impl_->epoll_fd.valid()) throw net::NetError("epoll_create1 failed");
    impl_->ctl(EPOLL_CTL_ADD, impl_->listen_fd.get(), EPOLLIN, kListenTag);
    impl_->ctl(EPOLL_CTL_ADD, impl_->waker.fd(), EPOLLIN, kWakeTag);
}

Broker::~Broker() = default;

void Broker::stop() {
    impl_->stopping = true;
    impl_->waker.notify();
}

BrokerStats Broker::stats() const {
    return BrokerStats{impl_->frames_in.load(), impl_->frames_out.load(), impl_->dropped.load(),
                       impl_->connections.load()};
}

void Broker::run() {
    Impl& s = *impl_;
    spdlog::info("broker listening on {}:{}", options_.listen.host, port_);
    std::array<epoll_event, 128> events{};
    TimePoint next_sweep = Clock::now() + options_.sweep_interval;
    while (!s.stopping) {
        const auto wait = std::chrono::duration_cast<std::chrono::milliseconds>(next_sweep - Clock::now());
        const int timeout = static_cast<int>(std::max<std::int64_t>(0, wait.count()));
        const int n = ::epoll_wait(s.epoll_fd.get(), events.data(), static_cast<int>(events.size()), timeout);
        if (n < 0 && errno != EINTR) throw net::NetError("epoll_wait failed");
        for (int i = 0; i < n; ++i) {
            const std::uint64_t tag = events[static_cast<std::size_t>(i)].data.u64;
            const std::uint32_t ev = events[static_cast<std::size_t>(i)].events;
            if (tag == kListenTag) {
                s.accept_all();
            } else if (tag == kWakeTag) {
                s.waker.drain();
            } else {
                if (ev & (EPOLLIN | EPOLLHUP | EPOLLERR)) s.read_conn(tag);
                if (ev & EPOLLOUT) s.dirty.push_back(tag);
            }
        }
        if (Clock::now() >= next_sweep) {
            s.apply(liveness_sweep(s.state, Clock::now(), options_.dead_after));
            next_sweep = Clock::now() + options_.sweep_interval;
        }
        s.flush_dirty();
    }
    std::vector<ConnId> ids;
    for (const auto& [id, c] : s.conns) ids.push_back(id);
    for (ConnId id : ids) s.close_conn(id);
    s.dirty.clear();
}

}  // namespace zsdn::bus
