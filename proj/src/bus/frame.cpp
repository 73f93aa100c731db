#include "zsdn/bus/frame.hpp"

namespace zsdn::bus {

namespace {

bool known_type(std::uint8_t t) { return t >= 0x01 && t <= 0x0A; }

class Reader {
public:
    explicit Reader(ByteView b) : b_(b) {}
    void need(std::size_t n) const {
        if (b_.size() - pos_ < n) throw ProtocolError("truncated frame body");
    }
    std::uint8_t u8() { need(1); return b_[pos_++]; }
    std::uint16_t u16() { need(2); auto v = get_u16(b_, pos_); pos_ += 2; return v; }
    std::uint32_t u32() { need(4); auto v = get_u32(b_, pos_); pos_ += 4; return v; }
    std::uint64_t u64() { need(8); auto v = get_u64(b_, pos_); pos_ += 8; return v; }
    ByteView take(std::size_t n) { need(n); auto v = b_.subspan(pos_, n); pos_ += n; return v; }
    ByteView rest() { return take(b_.size() - pos_); }
    bool done() const { return pos_ == b_.size(); }

private:
    ByteView b_;
    std::size_t pos_ = 0;
};

void put_pattern(Bytes& out, const topic::SubscriptionPattern& p) {
    put_u8(out, static_cast<std::uint8_t>(p.size()));
    put_bytes(out, p.bytes());
    put_bytes(out, p.mask());
}

topic::SubscriptionPattern read_pattern(Reader& r) {
    const std::uint8_t len = r.u8();
    ByteView bytes = r.take(len);
    ByteView mask = r.take((len + 7u) / 8u);
    try {
        return topic::SubscriptionPattern::with_mask(bytes, mask);
    } catch (const std::invalid_argument& e) {
        throw ProtocolError(std::string("bad pattern: ") + e.what());
    }
}

topic::Topic to_topic(ByteView bytes) {
    try {
        return topic::Topic::from_bytes(bytes);
    } catch (const std::invalid_argument& e) {
        throw ProtocolError(std::string("bad topic: ") + e.what());
    }
}

}  // namespace

const char* frame_type_name(FrameType t) {
    switch (t) {
        case FrameType::Register: return "REGISTER";
        case FrameType::RegisterAck: return "REGISTER_ACK";
        case FrameType::Subscribe: return "SUBSCRIBE";
        case FrameType::Unsubscribe: return "UNSUBSCRIBE";
        case FrameType::Publish: return "PUBLISH";
        case FrameType::Event: return "EVENT";
        case FrameType::Request: return "REQUEST";
        case FrameType::Reply: return "REPLY";
        case FrameType::Heartbeat: return "HEARTBEAT";
        case FrameType::Bye: return "BYE";
    }
    return "UNKNOWN";
}

void frame_encode_into(Bytes& out, FrameType type, ByteView body) {
    if (body.size() > kMaxBody) throw ProtocolError("frame body of " + std::to_string(body.size()) + " bytes exceeds 16 MiB");
    put_u32(out, static_cast<std::uint32_t>(1 + body.size()));
    put_u8(out, static_cast<std::uint8_t>(type));
    put_bytes(out, body);
}

Bytes frame_encode(const Frame& frame) {
    Bytes out;
    out.reserve(5 + frame.body.size());
    frame_encode_into(out, frame.type, frame.body);
    return out;
}

Frame frame_decode(ByteView bytes) {
    if (bytes.size() < 5) throw ProtocolError("truncated frame header");
    const std::uint32_t len = get_u32(bytes, 0);
    if (len == 0) throw ProtocolError("frame length 0");
    if (len - 1 > kMaxBody) throw ProtocolError("oversize frame");
    if (bytes.size() != 4 + static_cast<std::size_t>(len)) throw ProtocolError("frame length does not match buffer");
    if (!known_type(bytes[4])) throw ProtocolError("unknown frame type " + std::to_string(bytes[4]));
    return Frame{static_cast<FrameType>(bytes[4]), Bytes(bytes.begin() + 5, bytes.end())};
}

std::optional<Frame> FrameReader::next() {
    const std::size_t avail = buffer_.size() - consumed_;
    if (avail < 4) return std::nullopt;
    const ByteView view(buffer_.data() + consumed_, avail);
    const std::uint32_t len = get_u32(view, 0);
    if (len == 0) throw ProtocolError("frame length 0");
    if (len - 1 > kMaxBody) throw ProtocolError("oversize frame");
    if (avail < 4 + static_cast<std::size_t>(len)) return std::nullopt;
    if (!known_type(view[4])) throw ProtocolError("unknown frame type " + std::to_string(view[4]));
    Frame f{static_cast<FrameType>(view[4]), Bytes(view.begin() + 5, view.begin() + 4 + len)};
    consumed_ += 4 + len;
    if (consumed_ == buffer_.size()) {
        buffer_.clear();
        consumed_ = 0;
    } else if (consumed_ > 256 * 1024) {
        buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(consumed_));
        consumed_ = 0;
    }
    return f;
}

Frame make_register(const RegisterBody& b) {
    Frame f{FrameType::Register, {}};
    put_u16(f.body, b.controllet_type);
    put_u64(f.body, b.instance_id);
    put_u16(f.body, static_cast<std::uint16_t>(b.to_patterns.size()));
    for (const auto& p : b.to_patterns) put_pattern(f.body, p);
    put_u16(f.body, static_cast<std::uint16_t>(b.from_topics.size()));
    for (const auto& t : b.from_topics) {
        put_u8(f.body, static_cast<std::uint8_t>(t.size()));
        put_bytes(f.body, t.bytes());
    }
    return f;
}

Frame make_register_ack(std::uint8_t st) { return Frame{FrameType::RegisterAck, Bytes{st}}; }

Frame make_subscribe(const topic::SubscriptionPattern& p, bool subscribe) {
    Frame f{subscribe ? FrameType::Subscribe : FrameType::Unsubscribe, {}};
    put_pattern(f.body, p);
    return f;
}

void encode_publish_into(Bytes& out, FrameType type, ByteView topic, ByteView payload) {
    const std::size_t body = 2 + topic.size() + payload.size();
    if (body > kMaxBody) throw ProtocolError("publish body exceeds 16 MiB");
    put_u32(out, static_cast<std::uint32_t>(1 + body));
    put_u8(out, static_cast<std::uint8_t>(type));
    put_u16(out, static_cast<std::uint16_t>(topic.size()));
    put_bytes(out, topic);
    put_bytes(out, payload);
}

Frame make_publish(const topic::Topic& t, ByteView payload, FrameType type) {
    Frame f{type, {}};
    f.body.reserve(2 + t.size() + payload.size());
    put_u16(f.body, static_cast<std::uint16_t>(t.size()));
    put_bytes(f.body, t.bytes());
    put_bytes(f.body, payload);
    return f;
}

Frame make_request(std::uint64_t peer, std::uint32_t req_id, ByteView payload) {
    Frame f{FrameType::Request, {}};
    put_u64(f.body, peer);
    put_u32(f.body, req_id);
    put_bytes(f.body, payload);
    return f;
}

Frame make_reply(std::uint32_t req_id, std::uint8_t st, ByteView payload) {
    Frame f{FrameType::Reply, {}};
    put_u32(f.body, req_id);
    put_u8(f.body, st);
    put_bytes(f.body, payload);
    return f;
}

Frame make_empty(FrameType type) { return Frame{type, {}}; }

RegisterBody parse_register(ByteView body) {
    Reader r(body);
    RegisterBody b;
    b.controllet_type = r.u16();
    b.instance_id = r.u64();
    const std::uint16_t n_to = r.u16();
    for (std::uint16_t i = 0; i < n_to; ++i) b.to_patterns.push_back(read_pattern(r));
    const std::uint16_t n_from = r.u16();
    for (std::uint16_t i = 0; i < n_from; ++i) {
        const std::uint8_t len = r.u8();
        b.from_topics.push_back(to_topic(r.take(len)));
    }
    if (!r.done()) throw ProtocolError("trailing bytes in REGISTER");
    return b;
}

std::uint8_t parse_register_ack(ByteView body) {
    if (body.size() != 1) throw ProtocolError("REGISTER_ACK body must be 1 byte");
    return body[0];
}

topic::SubscriptionPattern parse_pattern_body(ByteView body) {
    Reader r(body);
    auto p = read_pattern(r);
    if (!r.done()) throw ProtocolError("trailing bytes after pattern");
    return p;
}

PublishView view_publish(ByteView body) {
    Reader r(body);
    const std::uint16_t tlen = r.u16();
    ByteView t = r.take(tlen);
    return PublishView{t, r.rest()};
}

PublishBody parse_publish(ByteView body) {
    const PublishView v = view_publish(body);
    return PublishBody{to_topic(v.topic), Bytes(v.payload.begin(), v.payload.end())};
}

RequestBody parse_request(ByteView body) {
    Reader r(body);
    RequestBody b;
    b.peer = r.u64();
    b.req_id = r.u32();
    ByteView rest = r.rest();
    b.payload.assign(rest.begin(), rest.end());
    return b;
}

ReplyBody parse_reply(ByteView body) {
    Reader r(body);
    ReplyBody b;
    b.req_id = r.u32();
    b.status = r.u8();
    ByteView rest = r.rest();
    b.payload.assign(rest.begin(), rest.end());
    return b;
}

}  // namespace zsdn::bus
