#include "zsdn/kernel/lifecycle.hpp"

#include <string>

namespace zsdn::kernel {

const char* to_string(LifecycleState s) {
    switch (s) {
        case LifecycleState::Init: return "INIT";
        case LifecycleState::Connecting: return "CONNECTING";
        case LifecycleState::WaitingDeps: return "WAITING_DEPS";
        case LifecycleState::Active: return "ACTIVE";
        case LifecycleState::Stopped: return "STOPPED";
    }
    return "?";
}

const char* to_string(LifecycleEvent e) {
    switch (e) {
        case LifecycleEvent::Connected: return "connected";
        case LifecycleEvent::RegisterAcked: return "register_acked";
        case LifecycleEvent::DepSatisfied: return "dep_satisfied";
        case LifecycleEvent::DepLost: return "dep_lost";
        case LifecycleEvent::Shutdown: return "shutdown";
        case LifecycleEvent::BrokerLost: return "broker_lost";
    }
    return "?";
}

LifecycleState lifecycle_step(LifecycleState state, LifecycleEvent event, bool deps_satisfied) {
    using S = LifecycleState;
    using E = LifecycleEvent;
    if (event == E::Shutdown) return S::Stopped;
    if (state != S::Stopped && event == E::BrokerLost) return S::Connecting;

    switch (state) {
        case S::Init:
            if (event == E::Connected) return S::Connecting;
            break;
        case S::Connecting:
            if (event == E::Connected) return S::Connecting;
            if (event == E::RegisterAcked) return deps_satisfied ? S::Active : S::WaitingDeps;
            break;
        case S::WaitingDeps:
            if (event == E::DepSatisfied) return S::Active;
            if (event == E::DepLost) return S::WaitingDeps;
            break;
        case S::Active:
            if (event == E::DepSatisfied || event == E::DepLost) return S::Active;
            break;
        case S::Stopped:
            break;
    }
    throw LifecycleError(std::string("undefined lifecycle transition: ") + to_string(state) + " + " +
                         to_string(event));
}

}  // namespace zsdn::kernel
