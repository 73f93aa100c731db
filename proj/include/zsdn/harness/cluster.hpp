#pragma once

// In-process deployment: broker, switch adapters and controllets each on
// their own thread, talking over loopback TCP exactly as separate processes.

#include <cstdint>
#include <memory>
#include <optional>
#include <thread>
#include <vector>

#include "zsdn/apps/learning_switch.hpp"
#include "zsdn/apps/topology.hpp"
#include "zsdn/bus/broker.hpp"
#include "zsdn/kernel/kernel.hpp"
#include "zsdn/sa/switch_adapter.hpp"

namespace zsdn::harness {

class BrokerProcess {
public:
    explicit BrokerProcess(bus::BrokerOptions options = {});
    ~BrokerProcess();
    net::Endpoint endpoint() const { return broker_.endpoint(); }
    bus::Broker& broker() { return broker_; }
    void stop();

private:
    bus::Broker broker_;
    std::thread thread_;
};

class SaProcess {
public:
    explicit SaProcess(sa::SaConfig config);
    ~SaProcess();
    net::Endpoint endpoint() const { return {"127.0.0.1", adapter_.port()}; }
    sa::SwitchAdapter& adapter() { return adapter_; }
    void stop();
    void kill();

private:
    sa::SwitchAdapter adapter_;
    std::thread thread_;
};

template <typename App>
class ControlletProcess {
public:
    ControlletProcess(kernel::KernelConfig config, std::unique_ptr<App> app)
        : app_(std::move(app)), kernel_(std::make_unique<kernel::Kernel>(std::move(config), *app_)) {
        thread_ = std::thread([this] { kernel_->run(); });
    }
    ~ControlletProcess() { stop(); }
    ControlletProcess(const ControlletProcess&) = delete;
    ControlletProcess& operator=(const ControlletProcess&) = delete;

    App& app() { return *app_; }
    kernel::Kernel& kernel() { return *kernel_; }
    void stop() {
        kernel_->stop();
        if (thread_.joinable()) thread_.join();
    }
    void kill() {
        kernel_->kill();
        if (thread_.joinable()) thread_.join();
    }

private:
    std::unique_ptr<App> app_;
    std::unique_ptr<kernel::Kernel> kernel_;
    std::thread thread_;
};

using LearningSwitchProcess = ControlletProcess<apps::LearningSwitch>;
using TopologyProcess = ControlletProcess<apps::Topology>;

/// Owns a broker plus any number of SAs and controllets; tears them down in
/// reverse start order.
class Cluster {
public:
    explicit Cluster(std::uint64_t seed = 1, bus::BrokerOptions broker = {});
    ~Cluster();

    net::Endpoint bus() const { return broker_->endpoint(); }
    bus::Broker& broker() { return broker_->broker(); }

    SaProcess& start_sa(std::uint32_t lb_groups);
    LearningSwitchProcess& start_learning_switch(std::optional<std::uint8_t> lb_group, std::uint64_t instance_id = 0);
    TopologyProcess& start_topology(apps::TopologyOptions options = {}, std::uint64_t instance_id = 0);

    const std::vector<std::unique_ptr<SaProcess>>& sas() const { return sas_; }
    const std::vector<std::unique_ptr<LearningSwitchProcess>>& learning_switches() const { return learners_; }

    /// Waits until every controllet started so far is ACTIVE.
    bool wait_active(std::chrono::milliseconds timeout);
    void shutdown();

private:
    kernel::KernelConfig base_config(const std::string& name, std::uint64_t instance_id);

    std::uint64_t seed_;
    std::uint64_t spawned_ = 0;
    std::unique_ptr<BrokerProcess> broker_;
    std::vector<std::unique_ptr<SaProcess>> sas_;
    std::vector<std::unique_ptr<LearningSwitchProcess>> learners_;
    std::vector<std::unique_ptr<TopologyProcess>> topologies_;
};

}  // namespace zsdn::harness
