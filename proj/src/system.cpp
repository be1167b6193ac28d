/*
 * Copyright (c) 2026 the gearsim authors.
 * SPDX-License-Identifier: Apache-2.0
 */
#include "gearsim/system.hpp"

namespace gearsim {

System::System(ScenarioConfig config)
    : cfg(std::move(config)), costs(cfg.cost_model), engine(cfg.seed) {
    machine.attach(*this);
    gear1.attach(*this);
    gear2.attach(*this);
    gdm.attach(*this);
    guests.attach(*this);
    supervision.attach(*this);

    machine.configure(cfg.platform);
    gdm.configure(static_cast<u32>(cfg.platform.devices.size()), cfg.dvm_ring_depth,
                  cfg.gdm_kernel_module);
    supervision.configure(cfg.supervision);
}

void System::boot() {
    if (booted_)
        return;
    booted_ = true;

    gear1.init(cfg.platform, cfg.vms);

    u64 image_pages = 0;
    for (const DeviceConfig& d : cfg.platform.devices)
        if (d.behavior == DeviceKind::Block)
            image_pages = std::max<u64>(image_pages, d.mmio_len);
    gdm.store().load(cfg.block_image, image_pages);

    for (const WorkloadAssign& w : cfg.workloads)
        guests.assign(VcpuRef{w.vm, w.vcpu}, parse_program(w.program));

    if (cfg.supervision.enabled) {
        for (const VmManifest& m : cfg.vms) {
            if (m.kind == VmKind::Primary || m.watchdog_period_ns == 0)
                continue;
            std::string subject = "vm:" + std::to_string(m.id);
            u64 l1p = m.watchdog_period_ns ? m.watchdog_period_ns : cfg.supervision.l1.period_ns;
            u64 l2p = m.watchdog_period_ns ? m.watchdog_period_ns : cfg.supervision.l2.period_ns;
            supervision.register_watchdog(Layer::L1RS, subject, l1p, cfg.supervision.l1.action);
            supervision.register_watchdog(Layer::L2RS, subject, l2p, cfg.supervision.l2.action);
        }
        supervision.register_watchdog(Layer::L3RS, "gear2", cfg.supervision.l3.period_ns,
                                      cfg.supervision.l3.action);
        supervision.register_watchdog(Layer::L4RS, "soc", cfg.supervision.l4.period_ns,
                                      cfg.supervision.l4.action);
        supervision.start();
    }

    engine.schedule(0, EventKind::Custom, [this] { gear2.boot(); });

    if (cfg.gear2_stall_at)
        engine.schedule(cfg.gear2_stall_at, EventKind::Custom, [this] { gear2.stall(); });
    if (cfg.vm_stall_at && !cfg.stall_vms.empty()) {
        engine.schedule(cfg.vm_stall_at, EventKind::Custom, [this] {
            for (VmId vm : cfg.stall_vms) {
                record(Actor::guest(VcpuRef{vm, 0}), Action::Stall, 0, {vm});
                const VmManifest* m = gear1.manifest(vm);
                for (u32 c = 0; m && c < m->vcpus; ++c) {
                    VcpuRef v{vm, c};
                    if (guests.has_guest(v))
                        guests.guest(v).stalled = true;
                }
            }
        });
    }
}

const Trace& System::run() {
    boot();
    return engine.run_until(cfg.duration_ns);
}

const Trace& System::run_until(SimTime deadline) {
    boot();
    return engine.run_until(deadline);
}

void System::guest_continue(PcpuId p, SimTime delay) {
    Pcpu& pc = machine.pcpu(p);
    pc.chain_busy = true;
    u64 gen = pc.chain_gen;
    engine.schedule_in(delay, EventKind::GuestStep, [this, p, gen] {
        Pcpu& pc2 = machine.pcpu(p);
        if (pc2.chain_gen != gen || !pc2.in_guest)
            return;
        guests.step(p, pc2.guest);
    });
}

void System::interrupt_guest(PcpuId p, ExitReason reason) {
    Pcpu& pc = machine.pcpu(p);
    if (!pc.in_guest)
        return;
    guests.preempt_compute(pc.guest);
    gear1.guest_trap(p, reason);
}

void System::rtvm_wake(PcpuId p, VcpuRef v) {
    Pcpu& pc = machine.pcpu(p);
    VcpuContext& ctx = gear1.context(v);
    if (ctx.run != RunState::Ready)
        return;
    ctx.run = RunState::Running;
    pc.in_guest = true;
    pc.guest = v;
    guest_continue(p, 0);
}

void System::kick_pcpu(PcpuId p, SimTime delay) {
    engine.schedule_in(delay, EventKind::Custom, [this, p] {
        Pcpu& pc = machine.pcpu(p);
        if (pc.on && !pc.in_guest && !pc.chain_busy)
            gear2.schedule_pcpu(p);
    });
}

System::Summary System::summarize() const {
    Summary s;
    s.scenario = cfg.name;
    s.seed = cfg.seed;
    s.duration_ns = cfg.duration_ns;
    s.events = engine.dispatched();
    s.records = engine.trace().size();
    s.irqs_raised = machine.irqs_raised();
    s.world_switches = gear1.world_switches();
    s.supervision_events = supervision.events().size();
    const auto& llc = machine.llc().stats();
    s.llc_hits = llc.hits;
    s.llc_cold = llc.cold;
    s.llc_self_conflict = llc.self_conflict;
    s.llc_cross_conflict = llc.cross_conflict;
    s.trace_hash = trace_hash(engine.trace());
    return s;
}

} // namespace gearsim
