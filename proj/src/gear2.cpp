/*
 * Copyright (c) 2026 the gearsim authors.
 * SPDX-License-Identifier: Apache-2.0
 */
#include "gearsim/gear2.hpp"

#include <algorithm>

#include "gearsim/system.hpp"

namespace gearsim {

// ------------------------------------------------------------ round robin

ThreadId RoundRobinPolicy::pick_next(Gear2&, std::deque<ThreadId>& queue) {
    if (queue.empty())
        return 0;
    ThreadId t = queue.front();
    queue.pop_front();
    return t;
}

void RoundRobinPolicy::on_ready(Gear2&, std::deque<ThreadId>& queue, ThreadId t) {
    queue.push_back(t);
}

void RoundRobinPolicy::on_block(Gear2&, std::deque<ThreadId>& queue, ThreadId t) {
    auto it = std::find(queue.begin(), queue.end(), t);
    if (it != queue.end())
        queue.erase(it);
}

// ------------------------------------------------------------------- boot

void Gear2::boot() {
    Machine& mc = sys_->machine;
    for (PcpuId p = 0; p < mc.pcpu_count(); ++p) {
        queues_[p];
        current_[p] = 0;
        if (!policies_.count(p))
            policies_[p] = std::make_unique<RoundRobinPolicy>();
    }
    create_threads();

    // power the secondary pcpus, one PSCI_CPU_ON per target, then enter the
    // idle loop (or hand an RTVM its dedicated core)
    const CostModel& cm = sys_->costs;
    u64 dt = 0;
    for (PcpuId p = 1; p < mc.pcpu_count(); ++p) {
        PcpuId target = p;
        sys_->engine.schedule_in(dt, EventKind::Custom, [this, target, cm] {
            sys_->record(Actor::gear2(), Action::Hypercall, cm.hypercall_ns,
                         {0, 0, static_cast<i64>(HypercallId::PsciCpuOn),
                          static_cast<i64>(target)},
                         Cause::Boot);
            i64 rc = sys_->gear1.psci_cpu_on(sys_->gear1.primary_vm(), target);
            if (rc != HC_OK)
                return;
            u64 after = cm.hypercall_ns + cm.el3_hop_ns;
            if (auto rtvm = sys_->gear1.rtvm_on(target)) {
                VmId vm = *rtvm;
                sys_->engine.schedule_in(after, EventKind::Custom, [this, target, vm] {
                    auto v = VcpuRef{vm, 0};
                    for (u32 c = 0; c < sys_->gear1.manifest(vm)->vcpus; ++c)
                        if (sys_->gear1.manifest(vm)->affinity[c] == target)
                            v = VcpuRef{vm, c};
                    sys_->gear1.launch_rtvm(target, v);
                });
            } else {
                sys_->kick_pcpu(target, after);
            }
        });
        dt += cm.hypercall_ns + cm.el3_hop_ns;
    }
    sys_->kick_pcpu(0, dt);
    start_services();
}

void Gear2::create_threads() {
    threads_.clear();
    threads_.push_back(Thread{}); // slot 0 = none
    by_vcpu_.clear();
    for (PcpuId p = 0; p < sys_->machine.pcpu_count(); ++p) {
        Thread idle;
        idle.id = static_cast<ThreadId>(threads_.size());
        idle.kind = ThreadKind::Idle;
        idle.pcpu = p;
        threads_.push_back(idle);
    }
    for (const VmManifest& m : sys_->gear1.manifests()) {
        if (m.kind == VmKind::Primary || m.kind == VmKind::Rtvm)
            continue; // RTVM vcpus never enter gear2 queues
        for (u32 c = 0; c < m.vcpus; ++c) {
            Thread th;
            th.id = static_cast<ThreadId>(threads_.size());
            th.kind = ThreadKind::Vcpu;
            th.vcpu = VcpuRef{m.id, c};
            th.state = ThreadState::Ready;
            th.pcpu = m.affinity[c]; // preferred pcpu per manifest affinity
            threads_.push_back(th);
            by_vcpu_[th.vcpu] = th.id;
            queues_[th.pcpu].push_back(th.id);
            sys_->gear1.context(th.vcpu).run = RunState::Ready;
        }
    }
}

void Gear2::register_policy(std::unique_ptr<SchedulerPolicy> policy, PcpuId p) {
    policies_[p] = std::move(policy); // in-flight threads are preserved
}

SchedulerPolicy& Gear2::policy(PcpuId p) {
    return *policies_.at(p);
}

ThreadId Gear2::thread_of(VcpuRef v) const {
    auto it = by_vcpu_.find(v);
    return it == by_vcpu_.end() ? 0 : it->second;
}

void Gear2::start_services() {
    // the primary VM's heartbeat doubles as the L3 (gear2) and L4 (soc)
    // liveness signal
    if (!sys_->supervision.config().enabled)
        return;
    u64 period = sys_->supervision.config().l3.period_ns / 2;
    if (period == 0)
        return;
    sys_->engine.schedule_in(period, EventKind::WatchdogCheck,
                             [this, period] { start_services_beat(period); });
}

void Gear2::start_services_beat(u64 period) {
    if (!stalled_) {
        sys_->supervision.kick(Layer::L3RS, "gear2");
        sys_->supervision.kick(Layer::L4RS, "soc");
    }
    sys_->engine.schedule_in(period, EventKind::WatchdogCheck,
                             [this, period] { start_services_beat(period); });
}

void Gear2::stall() {
    stalled_ = true;
    sys_->record(Actor::gear2(), Action::Stall, 0, {-2});
}

void Gear2::unstall() {
    if (!stalled_)
        return;
    stalled_ = false;
    // resume scheduling on every pcpu that sat idle through the stall
    for (PcpuId p = 0; p < sys_->machine.pcpu_count(); ++p)
        sys_->kick_pcpu(p, 0);
}

// ------------------------------------------------------------- scheduling

void Gear2::schedule_pcpu(PcpuId p) {
    if (stalled_)
        return;
    Pcpu& pc = sys_->machine.pcpu(p);
    if (!pc.on || pc.in_guest)
        return;
    pc.chain_busy = true;

    ThreadId cur = current_.at(p);
    if (cur) {
        Thread& th = threads_[cur];
        if (!th.slice_expired && th.state == ThreadState::Ready) {
            run_current(p, th.wake_cause);
            return;
        }
        if (th.slice_expired && th.state == ThreadState::Ready) {
            // quantum used up: back to the tail
            ++quantum_expiries_;
            ++th.quanta;
            sys_->record(Actor::gear2(), Action::QuantumExpiry, 0,
                         {static_cast<i64>(p), th.id, th.vcpu.vm, th.vcpu.vcpu});
            th.slice_expired = false;
            th.fresh_slice = true;
            policies_.at(p)->on_ready(*this, queues_.at(p), th.id);
        }
        current_[p] = 0;
    }
    rotate(p);
}

void Gear2::rotate(PcpuId p) {
    ThreadId next = policies_.at(p)->pick_next(*this, queues_.at(p));
    if (!next) {
        current_[p] = 0;
        sys_->machine.pcpu(p).chain_busy = false;
        sys_->record(Actor::gear2(), Action::SchedIdle, 0, {static_cast<i64>(p)});
        return; // idle runs iff the queue is empty
    }
    Thread& th = threads_[next];
    current_[p] = next;
    th.state = ThreadState::Running;
    th.fresh_slice = true;
    sys_->record(Actor::gear2(), Action::SchedPick, 0,
                 {static_cast<i64>(p), th.id, th.vcpu.vm, th.vcpu.vcpu});
    run_current(p, th.wake_cause != Cause::None ? th.wake_cause : Cause::Sched);
}

void Gear2::run_current(PcpuId p, Cause cause) {
    Thread& th = threads_[current_.at(p)];
    th.state = ThreadState::Running;
    th.wake_cause = Cause::None;
    sys_->gear1.run_vcpu(p, th.vcpu, cause == Cause::None ? Cause::Sched : cause);
}

void Gear2::on_guest_entered(PcpuId p, VcpuRef v) {
    ThreadId tid = thread_of(v);
    if (!tid)
        return; // RTVM launch: no gear2 slice management
    Thread& th = threads_[tid];
    if (th.fresh_slice) {
        th.fresh_slice = false;
        th.slice_expired = false;
        u64 gen = ++th.slice_gen;
        u64 quantum = sys_->cfg.sched.quantum_ns;
        th.slice_end = sys_->now() + quantum;
        sys_->engine.schedule(th.slice_end, EventKind::TimerFire,
                              [this, p, tid, gen] { quantum_tick(p, tid, gen); });
    }
}

void Gear2::quantum_tick(PcpuId p, ThreadId t, u64 slice_gen) {
    Thread& th = threads_[t];
    if (th.slice_gen != slice_gen || current_.at(p) != t)
        return; // slice already over
    Pcpu& pc = sys_->machine.pcpu(p);
    if (pc.in_guest && pc.guest == th.vcpu) {
        // scheduler tick arrives as a physical interrupt owned by the
        // primary VM
        sys_->interrupt_guest(p, ExitReason{ExitReason::PhysIrq, kTickLine});
        return;
    }
    th.slice_expired = true; // rotation happens at the next scheduling point
}

// ---------------------------------------------------------------- wakeups

void Gear2::on_ready(VcpuRef v, Cause cause) {
    if (stalled_)
        return;
    ThreadId tid = thread_of(v);
    if (!tid)
        return;
    Thread& th = threads_[tid];
    if (th.state != ThreadState::Blocked)
        return;
    th.state = ThreadState::Ready;
    th.block = BlockReason::None;
    th.wake_cause = cause;
    th.fresh_slice = true;
    if (current_.at(th.pcpu) != tid)
        policies_.at(th.pcpu)->on_ready(*this, queues_.at(th.pcpu), tid);
}

void Gear2::on_phys_irq(PcpuId p, IrqLine line) {
    if (stalled_)
        return;
    dispatch_irq(p, line);
    // if this pcpu idles, the inject's wake kick re-enters the scheduler
}

void Gear2::dispatch_irq(PcpuId p, IrqLine line) {
    (void)p;
    auto route = sys_->machine.gicd().route.at(line);
    if (!route)
        return;
    if (route->vm == sys_->gear1.primary_vm())
        return; // primary-owned line: handled locally, nothing to forward
    const CostModel& cm = sys_->costs;
    sys_->record(Actor::gear2(), Action::Hypercall, cm.hypercall_ns,
                 {route->vm, route->vcpu, static_cast<i64>(HypercallId::VirqInject),
                  static_cast<i64>(line)});
    sys_->gear1.virq_inject(*route, line, true, cm.hypercall_ns);
}

// ---------------------------------------------------------------- vm exit

void Gear2::on_vm_exit(PcpuId p, VmExitMessage msg) {
    if (stalled_) {
        sys_->machine.pcpu(p).chain_busy = false;
        return;
    }
    Pcpu& pc = sys_->machine.pcpu(p);
    pc.chain_busy = true;
    ThreadId tid = thread_of(msg.source);
    Thread* th = tid ? &threads_[tid] : nullptr;
    VcpuContext& ctx = sys_->gear1.context(msg.source);
    const CostModel& cm = sys_->costs;
    u64 dt = 0;

    switch (msg.reason.kind) {
    case ExitReason::Wfi:
        if (th) {
            th->state = ThreadState::Blocked;
            th->block = BlockReason::Wfi;
            ++th->slice_gen; // slice ends on block
            policies_.at(p)->on_block(*this, queues_.at(p), tid);
            current_[p] = 0;
        }
        ctx.run = RunState::Blocked;
        ctx.block = BlockReason::Wfi;
        break;

    case ExitReason::MmioRead:
    case ExitReason::MmioWrite:
        push_mmio_request(p, msg.source, msg.reason);
        dt += cm.hypercall_ns + cm.virq_inject_ns; // DVM kick
        if (msg.reason.blocking) {
            if (th) {
                th->state = ThreadState::Blocked;
                th->block = BlockReason::Mmio;
                ++th->slice_gen;
                policies_.at(p)->on_block(*this, queues_.at(p), tid);
                current_[p] = 0;
            }
            ctx.run = RunState::Blocked;
            ctx.block = BlockReason::Mmio;
        } else {
            ctx.sys.program_point += 1; // store completes asynchronously
        }
        break;

    case ExitReason::PhysIrq:
        if (msg.reason.a == kTickLine) {
            if (th)
                th->slice_expired = true;
        } else {
            dispatch_irq(p, static_cast<IrqLine>(msg.reason.a));
            dt += cm.hypercall_ns + cm.virq_inject_ns;
            if (th)
                th->wake_cause = Cause::IrqFwd; // resume is part of forwarding
        }
        break;

    case ExitReason::Stage2Perm:
        sys_->record(Actor::guest(msg.source), Action::GuestFault, 0,
                     {msg.source.vm, msg.source.vcpu, static_cast<i64>(msg.reason.a), 2});
        ctx.sys.program_point += 1; // faulting access is skipped
        break;

    case ExitReason::Yield:
        if (msg.reason.d) { // program end: parks forever
            if (th) {
                th->state = ThreadState::Blocked;
                th->block = BlockReason::Done;
                ++th->slice_gen;
                policies_.at(p)->on_block(*this, queues_.at(p), tid);
                current_[p] = 0;
            }
            ctx.run = RunState::Blocked;
            ctx.block = BlockReason::Done;
        } else if (th) {
            th->slice_expired = true; // voluntary rotation
        }
        break;

    case ExitReason::Hypercall:
    case ExitReason::GicdAccess:
        break; // resolved inside gear1, never routed
    }

    u64 gen = ++pc.chain_gen;
    sys_->engine.schedule_in(dt, EventKind::Custom, [this, p, gen] {
        if (sys_->machine.pcpu(p).chain_gen != gen)
            return;
        schedule_pcpu(p);
    });
}

// --------------------------------------------------------------------- io

void Gear2::push_mmio_request(PcpuId p, VcpuRef src, ExitReason r) {
    (void)p;
    DeviceState* dev = sys_->machine.device_at(r.a);
    if (!dev) {
        sys_->record(Actor::guest(src), Action::GuestFault, 0,
                     {src.vm, src.vcpu, static_cast<i64>(r.a), 3});
        sys_->gear1.context(src).sys.program_point += 1;
        return;
    }
    DvmRequest req;
    req.tag = next_io_tag();
    req.source = src;
    req.dev_index = dev->index;
    req.write = r.kind == ExitReason::MmioWrite;
    req.offset = r.a - dev->cfg.mmio_base;
    req.size = static_cast<u32>(r.b);
    req.value = r.c;
    req.blocking = r.blocking;

    if (!sys_->gdm.submit(req)) {
        // ring full: source stays blocked, retry after a fixed delay
        sys_->record(Actor::gear2(), Action::IoBackpressure, 0,
                     {src.vm, src.vcpu, dev->index});
        u64 retry = sys_->cfg.ring_retry_ns;
        sys_->engine.schedule_in(retry, EventKind::IoComplete,
                                 [this, req]() mutable { retry_submit(req); });
        return;
    }
    ++mmio_requests_;
    inflight_[req.tag] = req;
    sys_->record(Actor::gear2(), Action::IoRequest, 0,
                 {src.vm, src.vcpu, dev->index, static_cast<i64>(req.tag)});
    // kick the DVM backend
    if (auto dvm = sys_->gear1.dvm()) {
        IrqLine kick = kVirtioKickBase + dev->index;
        const CostModel& cm = sys_->costs;
        sys_->record(Actor::gear2(), Action::Hypercall, cm.hypercall_ns,
                     {*dvm, 0, static_cast<i64>(HypercallId::VirqInject),
                      static_cast<i64>(kick)});
        sys_->gear1.virq_inject(VcpuRef{*dvm, 0}, kick, true, cm.hypercall_ns);
    }
}

void Gear2::retry_submit(DvmRequest req) {
    if (stalled_)
        return;
    if (!sys_->gdm.submit(req)) {
        sys_->engine.schedule_in(sys_->cfg.ring_retry_ns, EventKind::IoComplete,
                                 [this, req]() mutable { retry_submit(req); });
        return;
    }
    ++mmio_requests_;
    inflight_[req.tag] = req;
    sys_->record(Actor::gear2(), Action::IoRequest, 0,
                 {req.source.vm, req.source.vcpu, req.dev_index, static_cast<i64>(req.tag)});
    if (auto dvm = sys_->gear1.dvm()) {
        IrqLine kick = kVirtioKickBase + req.dev_index;
        const CostModel& cm = sys_->costs;
        sys_->record(Actor::gear2(), Action::Hypercall, cm.hypercall_ns,
                     {*dvm, 0, static_cast<i64>(HypercallId::VirqInject),
                      static_cast<i64>(kick)});
        sys_->gear1.virq_inject(VcpuRef{*dvm, 0}, kick, true, cm.hypercall_ns);
    }
}

void Gear2::on_io_ack(u64 tag, bool ok, u64 value) {
    auto it = inflight_.find(tag);
    if (it == inflight_.end())
        return;
    DvmRequest req = it->second;
    inflight_.erase(it);
    ++mmio_acks_;
    sys_->record(Actor::gear2(), Action::IoAck, 0,
                 {req.dev_index, static_cast<i64>(tag), ok ? 1 : 0});
    if (!req.blocking)
        return;
    // completion: value lands in the context, the instruction pointer moves
    // forward and the vcpu becomes schedulable again
    VcpuContext& ctx = sys_->gear1.context(req.source);
    ctx.gpr[0] = ok ? value : static_cast<u64>(-1);
    ctx.sys.program_point += 1;
    ++ip_advances_;
    if (ctx.run == RunState::Blocked && ctx.block == BlockReason::Mmio) {
        ctx.run = RunState::Ready;
        ctx.block = BlockReason::None;
        ThreadId tid = thread_of(req.source);
        if (tid) {
            Thread& th = threads_[tid];
            if (th.state == ThreadState::Blocked) {
                th.state = ThreadState::Ready;
                th.block = BlockReason::None;
                th.wake_cause = Cause::Io;
                th.fresh_slice = true;
                policies_.at(th.pcpu)->on_ready(*this, queues_.at(th.pcpu), tid);
                sys_->kick_pcpu(th.pcpu, 0);
            }
        }
    }
}

void Gear2::on_vm_restarted(VmId vm) {
    for (auto& [v, tid] : by_vcpu_) {
        if (v.vm != vm)
            continue;
        Thread& th = threads_[tid];
        th.state = ThreadState::Ready;
        th.block = BlockReason::None;
        th.wake_cause = Cause::Boot;
        th.fresh_slice = true;
        th.slice_expired = false;
        ++th.slice_gen;
        auto& q = queues_.at(th.pcpu);
        if (std::find(q.begin(), q.end(), tid) == q.end() && current_.at(th.pcpu) != tid)
            q.push_back(tid);
        sys_->kick_pcpu(th.pcpu, 0);
    }
}

} // namespace gearsim
