#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <vector>

#include "zsdn/bus/broker_core.hpp"
#include "zsdn/bus/session.hpp"

namespace zsdn::kernel {

using bus::lifecycle::Member;

/// Local picture of live controllets, rebuilt from a LIST reply and kept
/// current by JOIN/LEAVE events.
class RegistryView {
public:
    void reset(const std::vector<Member>& members);
    void join(const Member& m);
    void leave(std::uint64_t instance_id);

    bool contains(std::uint64_t instance_id) const { return live_.contains(instance_id); }
    std::size_t count(std::uint16_t controllet_type) const;
    std::vector<std::uint64_t> instances_of(std::uint16_t controllet_type) const;
    std::vector<Member> members() const;
    std::size_t size() const { return live_.size(); }
    bool empty() const { return live_.empty(); }

    friend bool operator==(const RegistryView&, const RegistryView&) = default;

private:
    std::map<std::uint64_t, std::uint16_t> live_;
};

struct Requirement {
    std::uint16_t controllet_type = 0;
    std::size_t min_instances = 1;
};

struct DependencySpec {
    std::vector<Requirement> required;
};

bool deps_satisfied(const RegistryView& view, const DependencySpec& spec);

class DiscoveryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// LIST request to the broker. Throws DiscoveryError on timeout or rejection.
RegistryView registry_query(bus::Session& session,
                            std::chrono::milliseconds timeout = bus::timing::kRequestTimeout);

}  // namespace zsdn::kernel
