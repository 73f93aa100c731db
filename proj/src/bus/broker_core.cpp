#include "zsdn/bus/broker_core.hpp"

#include <algorithm>

namespace zsdn::bus {

namespace lifecycle {

topic::Topic topic_for(std::uint8_t code) {
    Bytes b;
    put_u8(b, topic::code::kFrom);
    put_u16(b, kKernelType);
    put_u8(b, code);
    return topic::Topic::from_bytes(b);
}

topic::SubscriptionPattern any_pattern() {
    Bytes b;
    put_u8(b, topic::code::kFrom);
    put_u16(b, kKernelType);
    return topic::SubscriptionPattern::literal(b);
}

Bytes encode_member(const Member& m) {
    Bytes b;
    put_u16(b, m.controllet_type);
    put_u64(b, m.instance_id);
    return b;
}

Member decode_member(ByteView payload) {
    if (payload.size() != 10) throw ProtocolError("lifecycle payload must be 10 bytes");
    return Member{get_u16(payload, 0), get_u64(payload, 2)};
}

Bytes encode_members(const std::vector<Member>& members) {
    Bytes b;
    put_u16(b, static_cast<std::uint16_t>(members.size()));
    for (const auto& m : members) {
        put_u16(b, m.controllet_type);
        put_u64(b, m.instance_id);
    }
    return b;
}

std::vector<Member> decode_members(ByteView payload) {
    if (payload.size() < 2) throw ProtocolError("member list too short");
    const std::uint16_t n = get_u16(payload, 0);
    if (payload.size() != 2 + static_cast<std::size_t>(n) * 10) throw ProtocolError("member list length mismatch");
    std::vector<Member> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t off = 2 + i * 10;
        out.push_back(Member{get_u16(payload, off), get_u64(payload, off + 2)});
    }
    return out;
}

}  // namespace lifecycle

namespace {

void publish_event(const BrokerState& state, Transition& t, const topic::Topic& topic, ByteView payload,
                   ConnId exclude) {
    std::vector<ConnId> targets;
    route_into(state.subscriptions, topic.bytes(), targets);
    if (targets.empty()) return;
    const Frame event = make_publish(topic, payload, FrameType::Event);
    for (ConnId c : targets) {
        if (c != exclude) t.out.push_back(Outbound{c, event});
    }
}

// Removes everything owned by `conn`; emits LEAVE and fails requests
// that were waiting on it.
void drop_connection(BrokerState& state, ConnId conn, Transition& t) {
    state.subscriptions.erase(conn);

    for (auto it = state.pending.begin(); it != state.pending.end();) {
        if (it->second.origin == conn) {
            it = state.pending.erase(it);
        } else if (it->second.target == conn) {
            t.out.push_back(Outbound{it->second.origin, make_reply(it->second.origin_req_id, status::kTargetLost, {})});
            it = state.pending.erase(it);
        } else {
            ++it;
        }
    }

    auto cid = state.conn_ids.find(conn);
    if (cid == state.conn_ids.end()) return;
    const std::uint64_t id = cid->second;
    state.conn_ids.erase(cid);
    auto reg = state.registrations.find(id);
    if (reg == state.registrations.end()) return;
    const lifecycle::Member member{reg->second.controllet_type, id};
    state.registrations.erase(reg);
    publish_event(state, t, lifecycle::topic_for(lifecycle::kLeave), lifecycle::encode_member(member), conn);
}

void fail_connection(BrokerState& state, ConnId conn, Transition& t) {
    drop_connection(state, conn, t);
    t.close.push_back(conn);
}

void handle_register(BrokerState& state, ConnId conn, const Frame& frame, TimePoint now, Transition& t) {
    RegisterBody body = parse_register(frame.body);
    if (state.conn_ids.contains(conn) || state.registrations.contains(body.instance_id)) {
        t.out.push_back(Outbound{conn, make_register_ack(status::kRejected)});
        return;
    }
    if (body.instance_id == kBrokerId) {
        t.out.push_back(Outbound{conn, make_register_ack(status::kInvalid)});
        return;
    }
    ControlletDescriptor d;
    d.controllet_type = body.controllet_type;
    d.instance_id = body.instance_id;
    d.to_patterns = body.to_patterns;
    d.from_topics = std::move(body.from_topics);
    d.last_heartbeat = now;
    d.conn = conn;
    state.registrations.emplace(d.instance_id, std::move(d));
    state.conn_ids.emplace(conn, body.instance_id);

    auto& subs = state.subscriptions[conn];
    for (auto& p : body.to_patterns) {
        if (std::find(subs.begin(), subs.end(), p) == subs.end()) subs.push_back(std::move(p));
    }

    t.out.push_back(Outbound{conn, make_register_ack(status::kOk)});
    publish_event(state, t, lifecycle::topic_for(lifecycle::kJoin),
                  lifecycle::encode_member({body.controllet_type, body.instance_id}), conn);
}

void handle_broker_request(const BrokerState& state, ConnId conn, const RequestBody& req, Transition& t) {
    if (!req.payload.empty() && req.payload[0] == opcode::kList) {
        t.out.push_back(Outbound{conn, make_reply(req.req_id, status::kOk, lifecycle::encode_members(members_of(state)))});
        return;
    }
    t.out.push_back(Outbound{conn, make_reply(req.req_id, status::kRejected, {})});
}

void handle_request(BrokerState& state, ConnId conn, const Frame& frame, Transition& t) {
    RequestBody req = parse_request(frame.body);
    if (req.peer == kBrokerId) {
        handle_broker_request(state, conn, req, t);
        return;
    }
    auto target = state.registrations.find(req.peer);
    if (target == state.registrations.end()) {
        t.out.push_back(Outbound{conn, make_reply(req.req_id, status::kRejected, {})});
        return;
    }
    std::uint32_t id = state.next_request_id;
    while (id == 0 || state.pending.contains(id)) ++id;
    state.next_request_id = id + 1;
    state.pending.emplace(id, PendingRequest{conn, req.req_id, target->second.conn});
    t.out.push_back(Outbound{target->second.conn, make_request(state.conn_ids.at(conn), id, req.payload)});
}

void handle_reply(BrokerState& state, ConnId conn, const Frame& frame, Transition& t) {
    ReplyBody rep = parse_reply(frame.body);
    auto it = state.pending.find(rep.req_id);
    if (it == state.pending.end() || it->second.target != conn) return;
    t.out.push_back(Outbound{it->second.origin, make_reply(it->second.origin_req_id, rep.status, rep.payload)});
    state.pending.erase(it);
}

}  // namespace

void route_into(const SubscriptionMap& subscriptions, ByteView topic, std::vector<ConnId>& out) {
    out.clear();
    for (const auto& [conn, patterns] : subscriptions) {
        for (const auto& p : patterns) {
            if (topic::matches(p, topic)) {
                out.push_back(conn);
                break;
            }
        }
    }
}

std::vector<ConnId> route(const SubscriptionMap& subscriptions, ByteView topic) {
    std::vector<ConnId> out;
    route_into(subscriptions, topic, out);
    return out;
}

Transition broker_handle(BrokerState& state, ConnId conn, const Frame& frame, TimePoint now) {
    Transition t;
    const bool registered = state.conn_ids.contains(conn);
    try {
        switch (frame.type) {
            case FrameType::Register:
                handle_register(state, conn, frame, now, t);
                return t;
            case FrameType::Heartbeat:
                if (registered) state.registrations.at(state.conn_ids.at(conn)).last_heartbeat = now;
                return t;
            case FrameType::Bye:
                drop_connection(state, conn, t);
                t.close.push_back(conn);
                return t;
            default:
                break;
        }
        if (!registered) {
            fail_connection(state, conn, t);
            return t;
        }
        switch (frame.type) {
            case FrameType::Subscribe: {
                auto p = parse_pattern_body(frame.body);
                auto& subs = state.subscriptions[conn];
                if (std::find(subs.begin(), subs.end(), p) == subs.end()) subs.push_back(std::move(p));
                break;
            }
            case FrameType::Unsubscribe: {
                const auto p = parse_pattern_body(frame.body);
                auto& subs = state.subscriptions[conn];
                std::erase(subs, p);
                break;
            }
            case FrameType::Publish: {
                const PublishView v = view_publish(frame.body);
                if (v.topic.empty() || v.topic.size() > topic::kMaxLength) throw ProtocolError("bad publish topic");
                std::vector<ConnId> targets;
                route_into(state.subscriptions, v.topic, targets);
                for (ConnId c : targets) {
                    if (c != conn) t.out.push_back(Outbound{c, Frame{FrameType::Event, frame.body}});
                }
                break;
            }
            case FrameType::Request:
                handle_request(state, conn, frame, t);
                break;
            case FrameType::Reply:
                handle_reply(state, conn, frame, t);
                break;
            default:
                // REGISTER_ACK and EVENT only flow broker -> client.
                throw ProtocolError(std::string("client sent ") + frame_type_name(frame.type));
        }
    } catch (const ProtocolError&) {
        t.out.clear();
        fail_connection(state, conn, t);
    }
    return t;
}

Transition broker_disconnect(BrokerState& state, ConnId conn) {
    Transition t;
    drop_connection(state, conn, t);
    return t;
}

Transition liveness_sweep(BrokerState& state, TimePoint now, std::chrono::milliseconds dead_after) {
    Transition t;
    std::vector<ConnId> stale;
    for (const auto& [id, d] : state.registrations) {
        if (now - d.last_heartbeat > dead_after) stale.push_back(d.conn);
    }
    for (ConnId c : stale) {
        drop_connection(state, c, t);
        t.close.push_back(c);
    }
    return t;
}

std::vector<lifecycle::Member> members_of(const BrokerState& state) {
    std::vector<lifecycle::Member> out;
    out.reserve(state.registrations.size());
    for (const auto& [id, d] : state.registrations) out.push_back({d.controllet_type, id});
    return out;
}

}  // namespace zsdn::bus
