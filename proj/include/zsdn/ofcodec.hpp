#pragma once

// OpenFlow 1.0 wire codec for the message subset the controller uses.
// Everything else decodes to Opaque and re-encodes verbatim.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "zsdn/bytes.hpp"

namespace zsdn::of {

inline constexpr std::uint8_t kVersion = 0x01;
inline constexpr std::size_t kHeaderLength = 8;
inline constexpr std::size_t kMaxMessageLength = 0xFFFF;

enum class MsgType : std::uint8_t {
    Hello = 0,
    Error = 1,
    EchoRequest = 2,
    EchoReply = 3,
    Vendor = 4,
    FeaturesRequest = 5,
    FeaturesReply = 6,
    PacketIn = 10,
    PortStatus = 12,
    PacketOut = 13,
    FlowMod = 14,
};

namespace port {
inline constexpr std::uint16_t kMax = 0xFF00;
inline constexpr std::uint16_t kInPort = 0xFFF8;
inline constexpr std::uint16_t kFlood = 0xFFFB;
inline constexpr std::uint16_t kAll = 0xFFFC;
inline constexpr std::uint16_t kController = 0xFFFD;
inline constexpr std::uint16_t kNone = 0xFFFF;
}  // namespace port

inline constexpr std::uint32_t kNoBuffer = 0xFFFFFFFF;

namespace flow_command {
inline constexpr std::uint16_t kAdd = 0;
inline constexpr std::uint16_t kModify = 1;
inline constexpr std::uint16_t kModifyStrict = 2;
inline constexpr std::uint16_t kDelete = 3;
inline constexpr std::uint16_t kDeleteStrict = 4;
}  // namespace flow_command

namespace port_reason {
inline constexpr std::uint8_t kAdd = 0;
inline constexpr std::uint8_t kDelete = 1;
inline constexpr std::uint8_t kModify = 2;
}  // namespace port_reason

inline constexpr std::uint32_t kPortStateLinkDown = 1;

/// ofp_match wildcard flags.
namespace wildcard {
inline constexpr std::uint32_t kInPort = 1u << 0;
inline constexpr std::uint32_t kDlVlan = 1u << 1;
inline constexpr std::uint32_t kDlSrc = 1u << 2;
inline constexpr std::uint32_t kDlDst = 1u << 3;
inline constexpr std::uint32_t kDlType = 1u << 4;
inline constexpr std::uint32_t kNwProto = 1u << 5;
inline constexpr std::uint32_t kTpSrc = 1u << 6;
inline constexpr std::uint32_t kTpDst = 1u << 7;
inline constexpr int kNwSrcShift = 8;
inline constexpr std::uint32_t kNwSrcMask = 0x3Fu << kNwSrcShift;
inline constexpr int kNwDstShift = 14;
inline constexpr std::uint32_t kNwDstMask = 0x3Fu << kNwDstShift;
inline constexpr std::uint32_t kDlVlanPcp = 1u << 20;
inline constexpr std::uint32_t kNwTos = 1u << 21;
inline constexpr std::uint32_t kAll = (1u << 22) - 1;
}  // namespace wildcard

struct Header {
    std::uint8_t version = kVersion;
    std::uint8_t type = 0;
    std::uint16_t length = kHeaderLength;
    std::uint32_t xid = 0;
    friend bool operator==(const Header&, const Header&) = default;
};

struct PortDesc {
    std::uint16_t port_no = 0;
    MacAddr hw_addr{};
    std::array<std::uint8_t, 16> name{};
    std::uint32_t config = 0;
    std::uint32_t state = 0;
    std::uint32_t curr = 0;
    std::uint32_t advertised = 0;
    std::uint32_t supported = 0;
    std::uint32_t peer = 0;

    std::string name_string() const;
    void set_name(std::string_view n);
    friend bool operator==(const PortDesc&, const PortDesc&) = default;
};

struct Match {
    std::uint32_t wildcards = wildcard::kAll;
    std::uint16_t in_port = 0;
    MacAddr dl_src{};
    MacAddr dl_dst{};
    std::uint16_t dl_vlan = 0;
    std::uint8_t dl_vlan_pcp = 0;
    std::uint16_t dl_type = 0;
    std::uint8_t nw_tos = 0;
    std::uint8_t nw_proto = 0;
    std::uint32_t nw_src = 0;
    std::uint32_t nw_dst = 0;
    std::uint16_t tp_src = 0;
    std::uint16_t tp_dst = 0;
    friend bool operator==(const Match&, const Match&) = default;
};

/// Copy of `m` with every wildcarded field zeroed (the form encode emits).
Match normalized(const Match& m);

struct OutputAction {
    std::uint16_t port = 0;
    std::uint16_t max_len = 0;
    friend bool operator==(const OutputAction&, const OutputAction&) = default;
};

/// Any action other than OUTPUT, kept as its type plus the bytes after the
/// 4-byte type/length prefix.
struct RawAction {
    std::uint16_t type = 0;
    Bytes body;
    friend bool operator==(const RawAction&, const RawAction&) = default;
};

using Action = std::variant<OutputAction, RawAction>;

struct Hello {
    std::uint32_t xid = 0;
    Bytes data;
    friend bool operator==(const Hello&, const Hello&) = default;
};

struct EchoRequest {
    std::uint32_t xid = 0;
    Bytes data;
    friend bool operator==(const EchoRequest&, const EchoRequest&) = default;
};

struct EchoReply {
    std::uint32_t xid = 0;
    Bytes data;
    friend bool operator==(const EchoReply&, const EchoReply&) = default;
};

struct FeaturesRequest {
    std::uint32_t xid = 0;
    friend bool operator==(const FeaturesRequest&, const FeaturesRequest&) = default;
};

struct FeaturesReply {
    std::uint32_t xid = 0;
    std::uint64_t datapath_id = 0;
    std::uint32_t n_buffers = 0;
    std::uint8_t n_tables = 1;
    std::uint32_t capabilities = 0;
    std::uint32_t actions = 0;
    std::vector<PortDesc> ports;
    friend bool operator==(const FeaturesReply&, const FeaturesReply&) = default;
};

struct PacketIn {
    std::uint32_t xid = 0;
    std::uint32_t buffer_id = kNoBuffer;
    std::uint16_t total_len = 0;
    std::uint16_t in_port = 0;
    std::uint8_t reason = 0;
    Bytes frame;
    friend bool operator==(const PacketIn&, const PacketIn&) = default;
};

struct PacketOut {
    std::uint32_t xid = 0;
    std::uint32_t buffer_id = kNoBuffer;
    std::uint16_t in_port = port::kNone;
    std::vector<Action> actions;
    Bytes frame;
    friend bool operator==(const PacketOut&, const PacketOut&) = default;
};

struct FlowMod {
    std::uint32_t xid = 0;
    Match match;
    std::uint64_t cookie = 0;
    std::uint16_t command = flow_command::kAdd;
    std::uint16_t idle_timeout = 0;
    std::uint16_t hard_timeout = 0;
    std::uint16_t priority = 0;
    std::uint32_t buffer_id = kNoBuffer;
    std::uint16_t out_port = port::kNone;
    std::uint16_t flags = 0;
    std::vector<Action> actions;
    friend bool operator==(const FlowMod&, const FlowMod&) = default;
};

struct PortStatus {
    std::uint32_t xid = 0;
    std::uint8_t reason = 0;
    PortDesc port;
    friend bool operator==(const PortStatus&, const PortStatus&) = default;
};

/// Well-formed message of a type outside the supported subset.
struct Opaque {
    Header header;
    Bytes body;
    friend bool operator==(const Opaque&, const Opaque&) = default;
};

using Message = std::variant<Hello, EchoRequest, EchoReply, FeaturesRequest, FeaturesReply, PacketIn, PacketOut,
                             FlowMod, PortStatus, Opaque>;

class DecodeError : public std::runtime_error {
public:
    DecodeError(std::size_t offset, const std::string& what)
        : std::runtime_error("offset " + std::to_string(offset) + ": " + what), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

class EncodeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Reads the fixed header; throws DecodeError if fewer than 8 bytes.
Header decode_header(ByteView bytes);

/// Decodes exactly one message occupying the whole buffer.
Message decode(ByteView bytes);

/// Encodes with header.length recomputed. Throws EncodeError when the
/// message would exceed 65535 bytes.
Bytes encode(const Message& msg);

std::uint32_t xid_of(const Message& msg);
std::uint8_t type_of(const Message& msg);
const char* type_name(std::uint8_t type);

/// Incremental splitter for an OpenFlow byte stream.
class StreamReader {
public:
    void feed(ByteView data) { buffer_.insert(buffer_.end(), data.begin(), data.end()); }
    /// Next complete raw message, if buffered. Throws DecodeError when a
    /// header announces a length below 8.
    std::optional<Bytes> next();
    std::size_t buffered() const { return buffer_.size() - consumed_; }

private:
    Bytes buffer_;
    std::size_t consumed_ = 0;
};

}  // namespace zsdn::of
