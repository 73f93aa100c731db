#pragma once

// Bus wire protocol.
//
//   frame   := length:u32be  type:u8  body       (length = 1 + |body|)
//
//   REGISTER     ctype:u16 id:u64 n_to:u16 pattern* n_from:u16 topic*
//   REGISTER_ACK status:u8
//   SUBSCRIBE    pattern
//   UNSUBSCRIBE  pattern
//   PUBLISH      tlen:u16 topic payload
//   EVENT        tlen:u16 topic payload
//   REQUEST      peer:u64 req_id:u32 payload   (peer = target on the way in, origin on the way out)
//   REPLY        req_id:u32 status:u8 payload
//   HEARTBEAT    (empty)
//   BYE          (empty)
//
//   pattern := len:u8 bytes[len] mask[(len+7)/8]
//   topic   := len:u8 bytes[len]               (inside REGISTER only)

#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "zsdn/bytes.hpp"
#include "zsdn/topic.hpp"

namespace zsdn::bus {

inline constexpr std::size_t kMaxBody = 16u * 1024u * 1024u;

enum class FrameType : std::uint8_t {
    Register = 0x01,
    RegisterAck = 0x02,
    Subscribe = 0x03,
    Unsubscribe = 0x04,
    Publish = 0x05,
    Event = 0x06,
    Request = 0x07,
    Reply = 0x08,
    Heartbeat = 0x09,
    Bye = 0x0A,
};

const char* frame_type_name(FrameType t);

namespace status {
inline constexpr std::uint8_t kOk = 0;
/// Duplicate registration, unknown request target, or unknown opcode.
inline constexpr std::uint8_t kRejected = 1;
/// Reply to a REQUEST whose target id is not registered.
inline constexpr std::uint8_t kNoSuchTarget = kRejected;
/// Target disconnected while the request was outstanding.
inline constexpr std::uint8_t kTargetLost = 2;
/// Malformed registration (e.g. reserved instance id 0).
inline constexpr std::uint8_t kInvalid = 3;
}  // namespace status

/// Instance id reserved for the broker itself.
inline constexpr std::uint64_t kBrokerId = 0;

namespace opcode {
inline constexpr std::uint8_t kList = 0x01;
inline constexpr std::uint8_t kPorts = 0x02;
inline constexpr std::uint8_t kLinks = 0x03;
}  // namespace opcode

namespace timing {
inline constexpr std::chrono::milliseconds kHeartbeatInterval{2000};
inline constexpr std::chrono::milliseconds kDeadAfter{6000};
inline constexpr std::chrono::milliseconds kRequestTimeout{5000};
}  // namespace timing

class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Frame {
    FrameType type = FrameType::Heartbeat;
    Bytes body;
    friend bool operator==(const Frame&, const Frame&) = default;
};

Bytes frame_encode(const Frame& frame);
void frame_encode_into(Bytes& out, FrameType type, ByteView body);

/// Decodes exactly one frame spanning the whole buffer.
Frame frame_decode(ByteView bytes);

/// Incremental decoder for a bus byte stream.
class FrameReader {
public:
    void feed(ByteView data) { buffer_.insert(buffer_.end(), data.begin(), data.end()); }
    Bytes& buffer() { return buffer_; }
    /// Throws ProtocolError on oversize or unknown frame types.
    std::optional<Frame> next();

private:
    Bytes buffer_;
    std::size_t consumed_ = 0;
};

// Typed frame bodies.

struct RegisterBody {
    std::uint16_t controllet_type = 0;
    std::uint64_t instance_id = 0;
    std::vector<topic::SubscriptionPattern> to_patterns;
    std::vector<topic::Topic> from_topics;
    friend bool operator==(const RegisterBody&, const RegisterBody&) = default;
};

struct PublishBody {
    topic::Topic topic;
    Bytes payload;
    friend bool operator==(const PublishBody&, const PublishBody&) = default;
};

struct RequestBody {
    std::uint64_t peer = 0;
    std::uint32_t req_id = 0;
    Bytes payload;
    friend bool operator==(const RequestBody&, const RequestBody&) = default;
};

struct ReplyBody {
    std::uint32_t req_id = 0;
    std::uint8_t status = status::kOk;
    Bytes payload;
    friend bool operator==(const ReplyBody&, const ReplyBody&) = default;
};

Frame make_register(const RegisterBody& b);
Frame make_register_ack(std::uint8_t status);
Frame make_subscribe(const topic::SubscriptionPattern& p, bool subscribe = true);
Frame make_publish(const topic::Topic& t, ByteView payload, FrameType type = FrameType::Publish);
Frame make_request(std::uint64_t peer, std::uint32_t req_id, ByteView payload);
Frame make_reply(std::uint32_t req_id, std::uint8_t status, ByteView payload);
Frame make_empty(FrameType type);

/// Appends a PUBLISH/EVENT frame without building an intermediate Frame.
void encode_publish_into(Bytes& out, FrameType type, ByteView topic, ByteView payload);

RegisterBody parse_register(ByteView body);
std::uint8_t parse_register_ack(ByteView body);
topic::SubscriptionPattern parse_pattern_body(ByteView body);
PublishBody parse_publish(ByteView body);
RequestBody parse_request(ByteView body);
ReplyBody parse_reply(ByteView body);

/// Topic bytes and payload of a PUBLISH/EVENT body without copying.
struct PublishView {
    ByteView topic;
    ByteView payload;
};
PublishView view_publish(ByteView body);

}  // namespace zsdn::bus
