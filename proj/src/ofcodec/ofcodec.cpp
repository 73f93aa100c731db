#include "zsdn/ofcodec.hpp"

#include <algorithm>

namespace zsdn::of {

namespace {

constexpr std::size_t kMatchLength = 40;
constexpr std::size_t kPortDescLength = 48;
constexpr std::size_t kFeaturesFixed = 24;
constexpr std::size_t kPacketInFixed = 10;
constexpr std::size_t kPacketOutFixed = 8;
constexpr std::size_t kFlowModFixed = kMatchLength + 24;
constexpr std::size_t kPortStatusBody = 8 + kPortDescLength;
constexpr std::uint16_t kActionOutput = 0;

// Bounds-checked cursor; every failure reports the absolute offset.
class Cursor {
public:
    explicit Cursor(ByteView data, std::size_t pos = 0) : data_(data), pos_(pos) {}

    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return data_.size() - pos_; }

    void need(std::size_t n, const char* what) const {
        if (remaining() < n) {
            throw DecodeError(pos_, std::string("truncated ") + what + ": need " + std::to_string(n) +
                                        " bytes, have " + std::to_string(remaining()));
        }
    }
    std::uint8_t u8() { need(1, "u8"); return data_[pos_++]; }
    std::uint16_t u16() { need(2, "u16"); auto v = get_u16(data_, pos_); pos_ += 2; return v; }
    std::uint32_t u32() { need(4, "u32"); auto v = get_u32(data_, pos_); pos_ += 4; return v; }
    std::uint64_t u64() { need(8, "u64"); auto v = get_u64(data_, pos_); pos_ += 8; return v; }
    MacAddr mac() { need(6, "mac"); auto v = get_mac(data_, pos_); pos_ += 6; return v; }
    void skip(std::size_t n) { need(n, "padding"); pos_ += n; }
    Bytes take(std::size_t n) {
        need(n, "body");
        Bytes out(data_.begin() + static_cast<std::ptrdiff_t>(pos_), data_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
        pos_ += n;
        return out;
    }
    Bytes rest() { return take(remaining()); }

private:
    ByteView data_;
    std::size_t pos_;
};

PortDesc read_port(Cursor& c) {
    c.need(kPortDescLength, "port descriptor");
    PortDesc p;
    p.port_no = c.u16();
    p.hw_addr = c.mac();
    for (auto& ch : p.name) ch = c.u8();
    p.config = c.u32();
    p.state = c.u32();
    p.curr = c.u32();
    p.advertised = c.u32();
    p.supported = c.u32();
    p.peer = c.u32();
    return p;
}

void write_port(Bytes& out, const PortDesc& p) {
    put_u16(out, p.port_no);
    put_bytes(out, p.hw_addr);
    put_bytes(out, p.name);
    put_u32(out, p.config);
    put_u32(out, p.state);
    put_u32(out, p.curr);
    put_u32(out, p.advertised);
    put_u32(out, p.supported);
    put_u32(out, p.peer);
}

Match read_match(Cursor& c) {
    c.need(kMatchLength, "match");
    Match m;
    m.wildcards = c.u32();
    m.in_port = c.u16();
    m.dl_src = c.mac();
    m.dl_dst = c.mac();
    m.dl_vlan = c.u16();
    m.dl_vlan_pcp = c.u8();
    c.skip(1);
    m.dl_type = c.u16();
    m.nw_tos = c.u8();
    m.nw_proto = c.u8();
    c.skip(2);
    m.nw_src = c.u32();
    m.nw_dst = c.u32();
    m.tp_src = c.u16();
    m.tp_dst = c.u16();
    return m;
}

void write_match(Bytes& out, const Match& raw) {
    const Match m = normalized(raw);
    put_u32(out, m.wildcards);
    put_u16(out, m.in_port);
    put_bytes(out, m.dl_src);
    put_bytes(out, m.dl_dst);
    put_u16(out, m.dl_vlan);
    put_u8(out, m.dl_vlan_pcp);
    put_zeros(out, 1);
    put_u16(out, m.dl_type);
    put_u8(out, m.nw_tos);
    put_u8(out, m.nw_proto);
    put_zeros(out, 2);
    put_u32(out, m.nw_src);
    put_u32(out, m.nw_dst);
    put_u16(out, m.tp_src);
    put_u16(out, m.tp_dst);
}

std::vector<Action> read_actions(Cursor& c, std::size_t total) {
    c.need(total, "action list");
    std::vector<Action> actions;
    const std::size_t end = c.pos() + total;
    while (c.pos() < end) {
        const std::size_t start = c.pos();
        if (end - start < 4) throw DecodeError(start, "truncated action header");
        const std::uint16_t type = c.u16();
        const std::uint16_t len = c.u16();
        if (len < 8 || len % 8 != 0 || start + len > end) {
            throw DecodeError(start + 2, "bad action length " + std::to_string(len));
        }
        if (type == kActionOutput) {
            if (len != 8) throw DecodeError(start + 2, "output action must be 8 bytes");
            OutputAction out;
            out.port = c.u16();
            out.max_len = c.u16();
            actions.emplace_back(out);
        } else {
            actions.emplace_back(RawAction{type, c.take(len - 4u)});
        }
    }
    return actions;
}

void write_actions(Bytes& out, const std::vector<Action>& actions) {
    for (const auto& a : actions) {
        if (const auto* o = std::get_if<OutputAction>(&a)) {
            put_u16(out, kActionOutput);
            put_u16(out, 8);
            put_u16(out, o->port);
            put_u16(out, o->max_len);
        } else {
            const auto& r = std::get<RawAction>(a);
            const std::size_t len = 4 + r.body.size();
            if (len % 8 != 0 || len > 0xFFFF) throw EncodeError("raw action length must be a multiple of 8");
            put_u16(out, r.type);
            put_u16(out, static_cast<std::uint16_t>(len));
            put_bytes(out, r.body);
        }
    }
}

std::size_t actions_length(const std::vector<Action>& actions) {
    std::size_t n = 0;
    for (const auto& a : actions) {
        n += std::holds_alternative<OutputAction>(a) ? 8 : 4 + std::get<RawAction>(a).body.size();
    }
    return n;
}

void begin(Bytes& out, std::uint8_t type, std::uint32_t xid) {
    put_u8(out, kVersion);
    put_u8(out, type);
    put_u16(out, 0);  // patched in finish()
    put_u32(out, xid);
}

Bytes finish(Bytes out) {
    if (out.size() > kMaxMessageLength) {
        throw EncodeError("message of " + std::to_string(out.size()) + " bytes exceeds the 16-bit length field");
    }
    out[2] = static_cast<std::uint8_t>(out.size() >> 8);
    out[3] = static_cast<std::uint8_t>(out.size());
    return out;
}

std::uint8_t code(MsgType t) { return static_cast<std::uint8_t>(t); }

struct Encoder {
    Bytes operator()(const Hello& m) const {
        Bytes out;
        begin(out, code(MsgType::Hello), m.xid);
        put_bytes(out, m.data);
        return finish(std::move(out));
    }
    Bytes operator()(const EchoRequest& m) const {
        Bytes out;
        begin(out, code(MsgType::EchoRequest), m.xid);
        put_bytes(out, m.data);
        return finish(std::move(out));
    }
    Bytes operator()(const EchoReply& m) const {
        Bytes out;
        begin(out, code(MsgType::EchoReply), m.xid);
        put_bytes(out, m.data);
        return finish(std::move(out));
    }
    Bytes operator()(const FeaturesRequest& m) const {
        Bytes out;
        begin(out, code(MsgType::FeaturesRequest), m.xid);
        return finish(std::move(out));
    }
    Bytes operator()(const FeaturesReply& m) const {
        Bytes out;
        begin(out, code(MsgType::FeaturesReply), m.xid);
        put_u64(out, m.datapath_id);
        put_u32(out, m.n_buffers);
        put_u8(out, m.n_tables);
        put_zeros(out, 3);
        put_u32(out, m.capabilities);
        put_u32(out, m.actions);
        for (const auto& p : m.ports) write_port(out, p);
        return finish(std::move(out));
    }
    Bytes operator()(const PacketIn& m) const {
        Bytes out;
        out.reserve(kHeaderLength + kPacketInFixed + m.frame.size());
        begin(out, code(MsgType::PacketIn), m.xid);
        put_u32(out, m.buffer_id);
        put_u16(out, m.total_len);
        put_u16(out, m.in_port);
        put_u8(out, m.reason);
        put_zeros(out, 1);
        put_bytes(out, m.frame);
        return finish(std::move(out));
    }
    Bytes operator()(const PacketOut& m) const {
        const std::size_t alen = actions_length(m.actions);
        if (alen > 0xFFFF) throw EncodeError("packet-out action list too long");
        Bytes out;
        out.reserve(kHeaderLength + kPacketOutFixed + alen + m.frame.size());
        begin(out, code(MsgType::PacketOut), m.xid);
        put_u32(out, m.buffer_id);
        put_u16(out, m.in_port);
        put_u16(out, static_cast<std::uint16_t>(alen));
        write_actions(out, m.actions);
        put_bytes(out, m.frame);
        return finish(std::move(out));
    }
    Bytes operator()(const FlowMod& m) const {
        Bytes out;
        begin(out, code(MsgType::FlowMod), m.xid);
        write_match(out, m.match);
        put_u64(out, m.cookie);
        put_u16(out, m.command);
        put_u16(out, m.idle_timeout);
        put_u16(out, m.hard_timeout);
        put_u16(out, m.priority);
        put_u32(out, m.buffer_id);
        put_u16(out, m.out_port);
        put_u16(out, m.flags);
        write_actions(out, m.actions);
        return finish(std::move(out));
    }
    Bytes operator()(const PortStatus& m) const {
        Bytes out;
        begin(out, code(MsgType::PortStatus), m.xid);
        put_u8(out, m.reason);
        put_zeros(out, 7);
        write_port(out, m.port);
        return finish(std::move(out));
    }
    Bytes operator()(const Opaque& m) const {
        Bytes out;
        begin(out, m.header.type, m.header.xid);
        put_bytes(out, m.body);
        return finish(std::move(out));
    }
};

}  // namespace

std::string PortDesc::name_string() const {
    auto end = std::find(name.begin(), name.end(), std::uint8_t{0});
    return std::string(name.begin(), end);
}

void PortDesc::set_name(std::string_view n) {
    name.fill(0);
    std::copy_n(n.begin(), std::min(n.size(), name.size() - 1), name.begin());
}

Match normalized(const Match& m) {
    Match n = m;
    const std::uint32_t w = m.wildcards;
    if (w & wildcard::kInPort) n.in_port = 0;
    if (w & wildcard::kDlVlan) n.dl_vlan = 0;
    if (w & wildcard::kDlSrc) n.dl_src = {};
    if (w & wildcard::kDlDst) n.dl_dst = {};
    if (w & wildcard::kDlType) n.dl_type = 0;
    if (w & wildcard::kNwProto) n.nw_proto = 0;
    if (w & wildcard::kTpSrc) n.tp_src = 0;
    if (w & wildcard::kTpDst) n.tp_dst = 0;
    if (w & wildcard::kDlVlanPcp) n.dl_vlan_pcp = 0;
    if (w & wildcard::kNwTos) n.nw_tos = 0;
    // nw_src/nw_dst wildcard counts give the number of ignored low bits.
    auto mask_low = [](std::uint32_t addr, std::uint32_t bits) -> std::uint32_t {
        if (bits >= 32) return 0;
        return addr & ~((1u << bits) - 1u);
    };
    n.nw_src = mask_low(m.nw_src, (w & wildcard::kNwSrcMask) >> wildcard::kNwSrcShift);
    n.nw_dst = mask_low(m.nw_dst, (w & wildcard::kNwDstMask) >> wildcard::kNwDstShift);
    return n;
}

Header decode_header(ByteView bytes) {
    if (bytes.size() < kHeaderLength) {
        throw DecodeError(bytes.size(), "short buffer: " + std::to_string(bytes.size()) + " bytes, header needs 8");
    }
    Header h;
    h.version = bytes[0];
    h.type = bytes[1];
    h.length = get_u16(bytes, 2);
    h.xid = get_u32(bytes, 4);
    return h;
}

Message decode(ByteView bytes) {
    const Header h = decode_header(bytes);
    if (h.version != kVersion) {
        throw DecodeError(0, "unsupported OpenFlow version " + std::to_string(h.version));
    }
    if (h.length < kHeaderLength || h.length != bytes.size()) {
        throw DecodeError(2, "length field says " + std::to_string(h.length) + ", buffer has " +
                                 std::to_string(bytes.size()));
    }
    Cursor c(bytes, kHeaderLength);
    auto expect_end = [&c]() {
        if (c.remaining() != 0) throw DecodeError(c.pos(), "trailing bytes after message body");
    };

    switch (static_cast<MsgType>(h.type)) {
        case MsgType::Hello:
            return Hello{h.xid, c.rest()};
        case MsgType::EchoRequest:
            return EchoRequest{h.xid, c.rest()};
        case MsgType::EchoReply:
            return EchoReply{h.xid, c.rest()};
        case MsgType::FeaturesRequest:
            expect_end();
            return FeaturesRequest{h.xid};
        case MsgType::FeaturesReply: {
            FeaturesReply m;
            m.xid = h.xid;
            c.need(kFeaturesFixed, "features reply");
            m.datapath_id = c.u64();
            m.n_buffers = c.u32();
            m.n_tables = c.u8();
            c.skip(3);
            m.capabilities = c.u32();
            m.actions = c.u32();
            if (c.remaining() % kPortDescLength != 0) {
                throw DecodeError(c.pos(), "port list is not a multiple of 48 bytes");
            }
            while (c.remaining() > 0) m.ports.push_back(read_port(c));
            return m;
        }
        case MsgType::PacketIn: {
            PacketIn m;
            m.xid = h.xid;
            c.need(kPacketInFixed, "packet-in");
            m.buffer_id = c.u32();
            m.total_len = c.u16();
            m.in_port = c.u16();
            m.reason = c.u8();
            c.skip(1);
            m.frame = c.rest();
            return m;
        }
        case MsgType::PacketOut: {
            PacketOut m;
            m.xid = h.xid;
            c.need(kPacketOutFixed, "packet-out");
            m.buffer_id = c.u32();
            m.in_port = c.u16();
            const std::uint16_t alen = c.u16();
            m.actions = read_actions(c, alen);
            m.frame = c.rest();
            return m;
        }
        case MsgType::FlowMod: {
            FlowMod m;
            m.xid = h.xid;
            c.need(kFlowModFixed, "flow-mod");
            m.match = read_match(c);
            m.cookie = c.u64();
            m.command = c.u16();
            m.idle_timeout = c.u16();
            m.hard_timeout = c.u16();
            m.priority = c.u16();
            m.buffer_id = c.u32();
            m.out_port = c.u16();
            m.flags = c.u16();
            m.actions = read_actions(c, c.remaining());
            return m;
        }
        case MsgType::PortStatus: {
            PortStatus m;
            m.xid = h.xid;
            c.need(kPortStatusBody, "port-status");
            m.reason = c.u8();
            c.skip(7);
            m.port = read_port(c);
            expect_end();
            return m;
        }
        default:
            return Opaque{h, c.rest()};
    }
}

Bytes encode(const Message& msg) { return std::visit(Encoder{}, msg); }

std::uint32_t xid_of(const Message& msg) {
    return std::visit(
        [](const auto& m) -> std::uint32_t {
            if constexpr (std::is_same_v<std::decay_t<decltype(m)>, Opaque>) {
                return m.header.xid;
            } else {
                return m.xid;
            }
        },
        msg);
}

std::uint8_t type_of(const Message& msg) {
    struct Visitor {
        std::uint8_t operator()(const Hello&) const { return code(MsgType::Hello); }
        std::uint8_t operator()(const EchoRequest&) const { return code(MsgType::EchoRequest); }
        std::uint8_t operator()(const EchoReply&) const { return code(MsgType::EchoReply); }
        std::uint8_t operator()(const FeaturesRequest&) const { return code(MsgType::FeaturesRequest); }
        std::uint8_t operator()(const FeaturesReply&) const { return code(MsgType::FeaturesReply); }
        std::uint8_t operator()(const PacketIn&) const { return code(MsgType::PacketIn); }
        std::uint8_t operator()(const PacketOut&) const { return code(MsgType::PacketOut); }
        std::uint8_t operator()(const FlowMod&) const { return code(MsgType::FlowMod); }
        std::uint8_t operator()(const PortStatus&) const { return code(MsgType::PortStatus); }
        std::uint8_t operator()(const Opaque& m) const { return m.header.type; }
    };
    return std::visit(Visitor{}, msg);
}

const char* type_name(std::uint8_t type) {
    switch (static_cast<MsgType>(type)) {
        case MsgType::Hello: return "HELLO";
        case MsgType::Error: return "ERROR";
        case MsgType::EchoRequest: return "ECHO_REQUEST";
        case MsgType::EchoReply: return "ECHO_REPLY";
        case MsgType::Vendor: return "VENDOR";
        case MsgType::FeaturesRequest: return "FEATURES_REQUEST";
        case MsgType::FeaturesReply: return "FEATURES_REPLY";
        case MsgType::PacketIn: return "PACKET_IN";
        case MsgType::PortStatus: return "PORT_STATUS";
        case MsgType::PacketOut: return "PACKET_OUT";
        case MsgType::FlowMod: return "FLOW_MOD";
    }
    return "OTHER";
}

std::optional<Bytes> StreamReader::next() {
    if (buffered() < kHeaderLength) return std::nullopt;
    ByteView view(buffer_.data() + consumed_, buffered());
    const std::uint16_t len = get_u16(view, 2);
    if (len < kHeaderLength) throw DecodeError(2, "stream header announces length " + std::to_string(len));
    if (view.size() < len) return std::nullopt;
    Bytes msg(view.begin(), view.begin() + len);
    consumed_ += len;
    if (consumed_ == buffer_.size()) {
        buffer_.clear();
        consumed_ = 0;
    } else if (consumed_ > 64 * 1024) {
        buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(consumed_));
        consumed_ = 0;
    }
    return msg;
}

}  // namespace zsdn::of
