#pragma once

#include <stdexcept>

namespace zsdn::kernel {

enum class LifecycleState { Init, Connecting, WaitingDeps, Active, Stopped };

enum class LifecycleEvent { Connected, RegisterAcked, DepSatisfied, DepLost, Shutdown, BrokerLost };

const char* to_string(LifecycleState s);
const char* to_string(LifecycleEvent e);

/// (state, event) pair the state machine does not define.
class LifecycleError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Transition table. `deps_satisfied` only matters for RegisterAcked.
///
///   INIT          + connected      -> CONNECTING
///   CONNECTING    + connected      -> CONNECTING     (reconnect attempt succeeded)
///   CONNECTING    + register_acked -> ACTIVE | WAITING_DEPS
///   WAITING_DEPS  + dep_satisfied  -> ACTIVE
///   WAITING_DEPS  + dep_lost       -> WAITING_DEPS
///   ACTIVE        + dep_satisfied  -> ACTIVE
///   ACTIVE        + dep_lost       -> ACTIVE         (no demotion)
///   any live      + broker_lost    -> CONNECTING
///   any           + shutdown       -> STOPPED
LifecycleState lifecycle_step(LifecycleState state, LifecycleEvent event, bool deps_satisfied = true);

}  // namespace zsdn::kernel
