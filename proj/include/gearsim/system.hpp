/*
 * Copyright (c) 2026 the gearsim authors.
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <string>

#include "gearsim/engine.hpp"
#include "gearsim/gdm.hpp"
#include "gearsim/gear1.hpp"
#include "gearsim/gear2.hpp"
#include "gearsim/guest.hpp"
#include "gearsim/machine.hpp"
#include "gearsim/scenario.hpp"
#include "gearsim/watchdog.hpp"

namespace gearsim {

/*
 * One simulation instance: the engine plus every component wired together.
 * Instances are fully independent; there is no shared mutable state, so
 * separate instances may run on separate threads.
 */
class System {
public:
    explicit System(ScenarioConfig cfg);

    System(const System&) = delete;
    System& operator=(const System&) = delete;

    /// gear1 init (manifest validation, stage-2 build, control transfer)
    /// plus the gear2 boot chain scheduled at t=0.
    void boot();

    /// Dispatch until the configured duration; returns the full trace.
    const Trace& run();
    const Trace& run_until(SimTime deadline);

    SimTime now() const { return engine.now(); }

    TraceRecord& record(Actor actor, Action action, u64 cost,
                        std::initializer_list<i64> args = {}, Cause cause = Cause::None) {
        return engine.record(actor, action, cost, args, cause);
    }

    /// Schedule the next step of the guest chain on p; invalidated by any
    /// chain_gen bump (trap injection, preemption).
    void guest_continue(PcpuId p, SimTime delay);

    /// Preempt the guest running on p with an implicit trap. Banks partial
    /// Compute progress before entering gear1.
    void interrupt_guest(PcpuId p, ExitReason reason);

    /// RTVM vcpus waiting in WFI resume in place (no hypervisor involved).
    void rtvm_wake(PcpuId p, VcpuRef v);

    /// Deferred scheduler entry for an idle pcpu (no-op when a chain is
    /// already in flight there).
    void kick_pcpu(PcpuId p, SimTime delay);

    struct Summary {
        std::string scenario;
        u64 seed = 0;
        SimTime duration_ns = 0;
        u64 events = 0;
        u64 records = 0;
        u64 irqs_raised = 0;
        u64 world_switches = 0;
        u64 supervision_events = 0;
        u64 llc_hits = 0;
        u64 llc_cold = 0;
        u64 llc_self_conflict = 0;
        u64 llc_cross_conflict = 0;
        std::string trace_hash;
    };
    Summary summarize() const;

    ScenarioConfig cfg;
    CostModel costs;
    Engine engine;
    Machine machine;
    Gear1 gear1;
    Gear2 gear2;
    Gdm gdm;
    GuestMgr guests;
    Supervision supervision;

private:
    bool booted_ = false;
};

} // namespace gearsim
