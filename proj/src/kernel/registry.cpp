#include "zsdn/kernel/registry.hpp"

namespace zsdn::kernel {

void RegistryView::reset(const std::vector<Member>& members) {
    live_.clear();
    for (const auto& m : members) live_[m.instance_id] = m.controllet_type;
}

void RegistryView::join(const Member& m) { live_[m.instance_id] = m.controllet_type; }

void RegistryView::leave(std::uint64_t instance_id) { live_.erase(instance_id); }

std::size_t RegistryView::count(std::uint16_t controllet_type) const {
    std::size_t n = 0;
    for (const auto& [id, type] : live_) n += type == controllet_type ? 1 : 0;
    return n;
}

std::vector<std::uint64_t> RegistryView::instances_of(std::uint16_t controllet_type) const {
    std::vector<std::uint64_t> out;
    for (const auto& [id, type] : live_) {
        if (type == controllet_type) out.push_back(id);
    }
    return out;
}

std::vector<Member> RegistryView::members() const {
    std::vector<Member> out;
    for (const auto& [id, type] : live_) out.push_back(Member{type, id});
    return out;
}

bool deps_satisfied(const RegistryView& view, const DependencySpec& spec) {
    for (const auto& r : spec.required) {
        if (view.count(r.controllet_type) < r.min_instances) return false;
    }
    return true;
}

RegistryView registry_query(bus::Session& session, std::chrono::milliseconds timeout) {
    const Bytes payload{bus::opcode::kList};
    bus::Reply reply;
    try {
        reply = session.request(bus::kBrokerId, payload, timeout);
    } catch (const bus::RequestTimeout& e) {
        throw DiscoveryError(std::string("registry query: ") + e.what());
    }
    if (reply.status != bus::status::kOk) throw DiscoveryError("registry query rejected by broker");
    RegistryView view;
    try {
        view.reset(bus::lifecycle::decode_members(reply.payload));
    } catch (const bus::ProtocolError& e) {
        throw DiscoveryError(std::string("malformed LIST reply: ") + e.what());
    }
    return view;
}

}  // namespace zsdn::kernel
