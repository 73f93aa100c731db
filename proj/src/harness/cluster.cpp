#include "zsdn/harness/cluster.hpp"

#include <spdlog/spdlog.h>

namespace zsdn::harness {

using std::chrono::milliseconds;

BrokerProcess::BrokerProcess(bus::BrokerOptions options) : broker_(std::move(options)) {
    thread_ = std::thread([this] { broker_.run(); });
}

BrokerProcess::~BrokerProcess() { stop(); }

void BrokerProcess::stop() {
    broker_.stop();
    if (thread_.joinable()) thread_.join();
}

SaProcess::SaProcess(sa::SaConfig config) : adapter_(std::move(config)) {
    thread_ = std::thread([this] {
        try {
            adapter_.run();
        } catch (const std::exception& e) {
            spdlog::warn("sa: {}", e.what());
        }
    });
}

SaProcess::~SaProcess() { stop(); }

void SaProcess::stop() {
    adapter_.stop();
    if (thread_.joinable()) thread_.join();
}

void SaProcess::kill() {
    adapter_.kill();
    if (thread_.joinable()) thread_.join();
}

Cluster::Cluster(std::uint64_t seed, bus::BrokerOptions broker) : seed_(seed) {
    broker.listen = net::Endpoint{"127.0.0.1", 0};
    broker_ = std::make_unique<BrokerProcess>(std::move(broker));
}

Cluster::~Cluster() { shutdown(); }

kernel::KernelConfig Cluster::base_config(const std::string& name, std::uint64_t instance_id) {
    kernel::KernelConfig c;
    c.name = name;
    c.bus = bus();
    c.instance_id = instance_id;
    c.seed = seed_ * 1000003 + ++spawned_;
    if (c.instance_id == 0) {
        // Deterministic per seed, never 0, far from typical dpids.
        c.instance_id = 0x5A00000000000000ull | (seed_ << 16) | spawned_;
    }
    return c;
}

SaProcess& Cluster::start_sa(std::uint32_t lb_groups) {
    sa::SaConfig config;
    config.listen = net::Endpoint{"127.0.0.1", 0};
    config.lb_groups = lb_groups;
    config.kernel = base_config("sa", 0);
    config.kernel.seed = seed_ * 1000003 + ++spawned_;
    sas_.push_back(std::make_unique<SaProcess>(std::move(config)));
    return *sas_.back();
}

LearningSwitchProcess& Cluster::start_learning_switch(std::optional<std::uint8_t> lb_group, std::uint64_t instance_id) {
    auto name = lb_group ? fmt::format("learning-switch-{}", *lb_group) : std::string("learning-switch-*");
    auto config = apps::LearningSwitch::config(base_config(name, instance_id), lb_group);
    learners_.push_back(std::make_unique<LearningSwitchProcess>(std::move(config), std::make_unique<apps::LearningSwitch>()));
    return *learners_.back();
}

TopologyProcess& Cluster::start_topology(apps::TopologyOptions options, std::uint64_t instance_id) {
    auto config = apps::Topology::config(base_config("topology", instance_id), options);
    topologies_.push_back(std::make_unique<TopologyProcess>(std::move(config), std::make_unique<apps::Topology>(options)));
    return *topologies_.back();
}

bool Cluster::wait_active(milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    auto left = [&] {
        return std::max(milliseconds(0), std::chrono::duration_cast<milliseconds>(deadline - std::chrono::steady_clock::now()));
    };
    for (auto& l : learners_) {
        if (!l->kernel().wait_for_state(kernel::LifecycleState::Active, left())) return false;
    }
    for (auto& t : topologies_) {
        if (!t->kernel().wait_for_state(kernel::LifecycleState::Active, left())) return false;
    }
    return true;
}

void Cluster::shutdown() {
    for (auto it = topologies_.rbegin(); it != topologies_.rend(); ++it) (*it)->stop();
    for (auto it = learners_.rbegin(); it != learners_.rend(); ++it) (*it)->stop();
    for (auto it = sas_.rbegin(); it != sas_.rend(); ++it) (*it)->stop();
    topologies_.clear();
    learners_.clear();
    sas_.clear();
    if (broker_) broker_->stop();
}

}  // namespace zsdn::harness
