/*
 * Copyright (c) 2026 the gearsim authors.
 * SPDX-License-Identifier: Apache-2.0
 */
#include "gearsim/guest.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gearsim/system.hpp"

namespace gearsim {

// ------------------------------------------------------------ text format

namespace {

u64 parse_num(const std::string& tok) {
    return std::stoull(tok, nullptr, 0);
}

std::vector<std::string> split(const std::string& s) {
    std::istringstream is(s);
    std::vector<std::string> out;
    std::string tok;
    while (is >> tok)
        out.push_back(tok);
    return out;
}

} // namespace

Instr parse_instr(const std::string& text) {
    auto tok = split(text);
    if (tok.empty())
        throw ConfigError(ConfigErrc::Schema, "empty instruction");
    Instr in;
    const std::string& op = tok[0];
    auto need = [&](size_t n) {
        if (tok.size() < n + 1)
            throw ConfigError(ConfigErrc::Schema, "instruction '" + text + "': missing operand");
    };
    if (op == "compute") {
        need(1);
        in.op = Instr::Compute;
        in.a = parse_num(tok[1]);
    } else if (op == "mmio") {
        need(2);
        in.op = Instr::Mmio;
        in.a = parse_num(tok[1]);
        in.write = tok[2] == "w";
        if (!in.write && tok[2] != "r")
            throw ConfigError(ConfigErrc::Schema, "mmio expects r|w");
        in.blocking = true;
        size_t i = 3;
        if (i < tok.size() && tok[i] == "nb") {
            in.blocking = false;
            ++i;
        }
        if (i < tok.size())
            in.b = parse_num(tok[i++]); // value
        in.c = 8;
        if (i < tok.size())
            in.c = parse_num(tok[i++]); // size
        if (!in.write)
            in.blocking = true; // reads always need the completion value
    } else if (op == "hypercall") {
        need(1);
        in.op = Instr::Hypercall;
        in.a = parse_num(tok[1]);
        if (tok.size() > 2)
            in.b = parse_num(tok[2]);
        if (tok.size() > 3)
            in.c = parse_num(tok[3]);
        if (tok.size() > 4)
            in.d = parse_num(tok[4]);
    } else if (op == "arm_timer") {
        need(1);
        in.op = Instr::ArmTimer;
        in.a = parse_num(tok[1]);
    } else if (op == "wfi") {
        in.op = Instr::Wfi;
    } else if (op == "mem_touch") {
        need(3);
        in.op = Instr::MemTouch;
        in.a = parse_num(tok[1]);
        in.b = parse_num(tok[2]);
        in.c = parse_num(tok[3]);
    } else if (op == "kick_watchdog") {
        in.op = Instr::KickWatchdog;
    } else if (op == "loop_to") {
        need(2);
        in.op = Instr::LoopTo;
        in.a = parse_num(tok[1]);
        in.b = parse_num(tok[2]); // 0 = unbounded
    } else {
        throw ConfigError(ConfigErrc::Schema, "unknown instruction '" + op + "'");
    }
    return in;
}

WorkloadProgram parse_program(const std::vector<std::string>& lines) {
    WorkloadProgram prog;
    for (const std::string& l : lines)
        prog.code.push_back(parse_instr(l));
    for (size_t i = 0; i < prog.code.size(); ++i) {
        const Instr& in = prog.code[i];
        if (in.op == Instr::LoopTo && in.a >= prog.code.size())
            throw ConfigError(ConfigErrc::Schema, "loop_to target out of range");
    }
    return prog;
}

std::string format_instr(const Instr& in) {
    char buf[128];
    switch (in.op) {
    case Instr::Compute: snprintf(buf, sizeof(buf), "compute %llu", (unsigned long long)in.a); break;
    case Instr::Mmio:
        snprintf(buf, sizeof(buf), "mmio 0x%llx %s%s 0x%llx %llu", (unsigned long long)in.a,
                 in.write ? "w" : "r", in.blocking ? "" : " nb", (unsigned long long)in.b,
                 (unsigned long long)in.c);
        break;
    case Instr::Hypercall:
        snprintf(buf, sizeof(buf), "hypercall %llu %llu %llu %llu", (unsigned long long)in.a,
                 (unsigned long long)in.b, (unsigned long long)in.c, (unsigned long long)in.d);
        break;
    case Instr::ArmTimer: snprintf(buf, sizeof(buf), "arm_timer %llu", (unsigned long long)in.a); break;
    case Instr::Wfi: snprintf(buf, sizeof(buf), "wfi"); break;
    case Instr::MemTouch:
        snprintf(buf, sizeof(buf), "mem_touch 0x%llx %llu %llu", (unsigned long long)in.a,
                 (unsigned long long)in.b, (unsigned long long)in.c);
        break;
    case Instr::KickWatchdog: snprintf(buf, sizeof(buf), "kick_watchdog"); break;
    case Instr::LoopTo:
        snprintf(buf, sizeof(buf), "loop_to %llu %llu", (unsigned long long)in.a,
                 (unsigned long long)in.b);
        break;
    }
    return buf;
}

// ---------------------------------------------------------------- profiles

GuestProfile xenomai_profile() {
    return GuestProfile{"xenomai", 1000, 38000, 1.0};
}

GuestProfile preempt_rt_profile() {
    return GuestProfile{"preempt_rt", 1000, 40000, 2.4};
}

LatencyStats latency_stats(const std::vector<u64>& samples) {
    LatencyStats st;
    st.count = samples.size();
    if (samples.empty())
        return st;
    st.min_ns = ~0ull;
    u64 sum = 0;
    for (u64 s : samples) {
        st.min_ns = std::min(st.min_ns, s);
        st.max_ns = std::max(st.max_ns, s);
        sum += s;
    }
    st.avg_ns = sum / samples.size();
    return st;
}

WorkloadProgram GuestMgr::make_profile(ProfileKind kind, u64 duration_ns, Addr io_dev_base) {
    WorkloadProgram prog;
    if (duration_ns == 0)
        return prog;
    if (kind == ProfileKind::IoBound) {
        // arm the streaming device once, then service completions
        prog.code.push_back(Instr{Instr::Mmio, io_dev_base, 1, 8, 0, true, false});
        prog.code.push_back(Instr{Instr::Wfi});
        prog.code.push_back(Instr{Instr::LoopTo, 1, 0});
    } else {
        u64 period = 1'000'000'000ull / kCpuBoundRateHz; // 250/s timer ticks
        prog.code.push_back(Instr{Instr::ArmTimer, period});
        prog.code.push_back(Instr{Instr::Compute, period});
        prog.code.push_back(Instr{Instr::LoopTo, 0, 0});
    }
    return prog;
}

WorkloadProgram GuestMgr::make_cyclictest(u64 period_ns, Addr gicc_base) {
    WorkloadProgram prog;
    prog.code.push_back(Instr{Instr::ArmTimer, period_ns});
    prog.code.push_back(Instr{Instr::Wfi});
    // interrupt acknowledge + end-of-interrupt on the per-CPU interface;
    // pass-through maps these, full emulation traps them
    prog.code.push_back(Instr{Instr::Mmio, gicc_base + 0x0C, 0, 4, 0, false, false});
    prog.code.push_back(Instr{Instr::Mmio, gicc_base + 0x10, 0, 4, 0, true, false});
    prog.code.push_back(Instr{Instr::Compute, 1000}); // task body (sample point)
    prog.code.push_back(Instr{Instr::LoopTo, 0, 0});
    return prog;
}

// -------------------------------------------------------------- interpreter

void GuestMgr::assign(VcpuRef v, WorkloadProgram prog) {
    GuestVcpu g;
    g.prog = std::move(prog);
    guests_[v] = std::move(g);
}

void GuestMgr::attach_rt_task(VcpuRef v, RtTask task) {
    guests_.at(v).rt = std::move(task);
}

const RtTask* GuestMgr::rt_task(VcpuRef v) const {
    auto it = guests_.find(v);
    if (it == guests_.end() || !it->second.rt)
        return nullptr;
    return &*it->second.rt;
}

void GuestMgr::reset_vm(VmId vm) {
    for (auto& [v, g] : guests_) {
        if (v.vm != vm)
            continue;
        g.loops_taken.clear();
        g.in_compute = false;
        g.compute_running = false;
        g.compute_remaining = 0;
        g.ended = false;
        g.stalled = false;
        if (g.rt) {
            g.rt->sample_pending = false;
        }
    }
}

void GuestMgr::preempt_compute(VcpuRef v) {
    auto it = guests_.find(v);
    if (it == guests_.end())
        return;
    GuestVcpu& g = it->second;
    if (g.in_compute && g.compute_running) {
        u64 elapsed = sys_->now() - g.compute_started;
        g.compute_remaining = g.compute_remaining > elapsed ? g.compute_remaining - elapsed : 0;
        g.compute_running = false;
    }
}

u64 GuestMgr::on_virq_delivered(VcpuRef v, IrqLine line) {
    auto it = guests_.find(v);
    if (it == guests_.end())
        return 0;
    GuestVcpu& g = it->second;
    if (!g.rt || line != kTimerVirqLine)
        return 0;
    RtTask& rt = *g.rt;
    u64 idx = rt.wakes++;
    const GuestProfile& pr = rt.profile;
    u64 base, contention = 0;
    if (idx == rt.spike_wake) {
        // designated worst-case wake: deterministic run maximum
        base = pr.wake_max_ns;
        contention = static_cast<u64>(static_cast<double>(rt.contention_worst_ns) *
                                      pr.contention_scale);
    } else {
        double u = sys_->engine.prng().next_double();
        double shaped = u * u;
        shaped *= shaped;
        shaped *= shaped; // u^8: long quiet tail, rare spikes
        base = pr.wake_min_ns +
               static_cast<u64>(shaped * static_cast<double>(pr.wake_max_ns - pr.wake_min_ns - 1));
        if (rt.contention_worst_ns) {
            double c = sys_->engine.prng().next_double();
            c *= c;
            c *= c; // u^4
            contention = static_cast<u64>(c * static_cast<double>(rt.contention_worst_ns) *
                                          pr.contention_scale * 0.5);
        }
    }
    u64 cost = base + contention;
    sys_->record(Actor::guest(v), Action::RtWakeCost, cost,
                 {v.vm, v.vcpu, static_cast<i64>(cost)});
    rt.sample_pending = true;
    return cost;
}

void GuestMgr::exit_end(PcpuId p, VcpuRef v) {
    Pcpu& pc = sys_->machine.pcpu(p);
    const VmManifest* m = sys_->gear1.manifest(v.vm);
    VcpuContext& ctx = sys_->gear1.context(v);
    if (m->kind == VmKind::Rtvm) {
        ctx.run = RunState::Blocked;
        ctx.block = BlockReason::Done;
        pc.chain_busy = false;
        return; // parks on its dedicated core
    }
    ExitReason r;
    r.kind = ExitReason::Yield;
    r.d = 1; // end of program
    sys_->gear1.guest_trap(p, r);
}

void GuestMgr::step(PcpuId p, VcpuRef v) {
    Pcpu& pc = sys_->machine.pcpu(p);
    auto git = guests_.find(v);
    if (git == guests_.end()) {
        exit_end(p, v);
        return;
    }
    GuestVcpu& g = git->second;
    VcpuContext& ctx = sys_->gear1.context(v);
    const CostModel& cm = sys_->costs;

    if (g.stalled) {
        exit_end(p, v);
        return;
    }

    // pending virtual interrupt delivery happens at step boundaries
    auto& gi = sys_->machine.gicc(v);
    if (!ctx.sys.irq_masked && gi.has_pending()) {
        auto line = gi.pop();
        sys_->record(Actor::guest(v), Action::VirqDelivered, 0,
                     {v.vm, v.vcpu, static_cast<i64>(*line)});
        u64 extra = on_virq_delivered(v, *line);
        auto dvm = sys_->gear1.dvm();
        if (dvm && v.vm == *dvm && *line >= kVirtioKickBase && *line < kVirtioKickBase + 32) {
            // device-model service runs before the guest program resumes
            u64 gen = pc.chain_gen;
            sys_->engine.schedule_in(extra, EventKind::IoComplete, [this, p, v, gen] {
                if (sys_->machine.pcpu(p).chain_gen != gen)
                    return;
                sys_->gdm.handle_io_events(v, [this, p, gen] {
                    if (sys_->machine.pcpu(p).chain_gen != gen)
                        return;
                    sys_->guest_continue(p, 0);
                });
            });
            return;
        }
        sys_->guest_continue(p, extra);
        return;
    }

    // compute blocks span multiple events and survive preemption
    if (g.in_compute) {
        if (g.compute_running) {
            g.in_compute = false;
            g.compute_running = false;
            g.compute_remaining = 0;
            ctx.sys.program_point += 1;
            // fall through to the next instruction
        } else {
            g.compute_running = true;
            g.compute_started = sys_->now();
            sys_->guest_continue(p, g.compute_remaining);
            return;
        }
    }

    u64 pp = ctx.sys.program_point;
    if (pp >= g.prog.code.size()) {
        g.ended = true;
        exit_end(p, v);
        return;
    }

    // cyclictest sample point: the task body resumes here
    if (g.rt && g.rt->sample_pending && pp == g.rt->sample_pc) {
        RtTask& rt = *g.rt;
        u64 latency = sys_->now() >= rt.expected_wake ? sys_->now() - rt.expected_wake : 0;
        rt.samples.push_back(latency);
        rt.sample_pending = false;
        sys_->record(Actor::guest(v), Action::RtWake, 0,
                     {v.vm, v.vcpu, static_cast<i64>(latency),
                      static_cast<i64>(rt.expected_wake)});
    }

    const Instr& in = g.prog.code[pp];
    ++g.instrs_executed;

    switch (in.op) {
    case Instr::Compute:
        g.in_compute = true;
        g.compute_running = true;
        g.compute_remaining = in.a;
        g.compute_started = sys_->now();
        sys_->guest_continue(p, in.a);
        return;

    case Instr::Mmio: {
        u32 size = in.c ? static_cast<u32>(in.c) : 8;
        AccessResult res = sys_->machine.mem_access(v, in.a, in.write, size, in.b);
        if (res.kind == AccessOutcome::Ok) {
            if (!in.write)
                ctx.gpr[0] = res.value;
            ctx.sys.program_point += 1;
            sys_->guest_continue(p, cm.guest_op_ns);
            return;
        }
        if (res.kind == AccessOutcome::FaultMmio) {
            ExitReason r;
            if (sys_->machine.is_gic_range(in.a)) {
                r.kind = ExitReason::GicdAccess;
                r.a = in.a;
                r.b = size;
                r.c = in.b;
                r.blocking = in.write; // carries the write flag
            } else {
                r.kind = in.write ? ExitReason::MmioWrite : ExitReason::MmioRead;
                r.a = in.a;
                r.b = size;
                r.c = in.b;
                r.blocking = in.blocking;
            }
            sys_->gear1.guest_trap(p, r);
            return;
        }
        ++g.faults;
        sys_->gear1.guest_trap(p, ExitReason{ExitReason::Stage2Perm, in.a});
        return;
    }

    case Instr::Hypercall:
        sys_->gear1.guest_hypercall(p, static_cast<u32>(in.a), in.b, in.c, in.d);
        return;

    case Instr::ArmTimer: {
        u64 cmp = sys_->now() + in.a;
        ctx.sys.el1_timer_cmp = cmp;
        ctx.sys.el1_timer_enabled = 1;
        sys_->machine.arm_el1(v, cmp);
        if (g.rt)
            g.rt->expected_wake = cmp;
        ctx.sys.program_point += 1;
        sys_->guest_continue(p, cm.guest_op_ns);
        return;
    }

    case Instr::Wfi: {
        if (!ctx.sys.irq_masked && gi.has_pending()) {
            // standard WFI: completes immediately when an interrupt is
            // already pending
            ctx.sys.program_point += 1;
            sys_->guest_continue(p, cm.guest_op_ns);
            return;
        }
        ctx.sys.program_point += 1; // resumes past the wait
        const VmManifest* m = sys_->gear1.manifest(v.vm);
        if (m->kind == VmKind::Rtvm) {
            ctx.run = RunState::Blocked;
            ctx.block = BlockReason::Wfi;
            pc.chain_busy = false; // waits in place, no exit
            return;
        }
        sys_->gear1.guest_trap(p, ExitReason{ExitReason::Wfi});
        return;
    }

    case Instr::MemTouch: {
        u64 count = in.c;
        for (u64 i = 0; i < count; ++i) {
            Addr a = in.a + i * in.b;
            AccessResult res = sys_->machine.mem_access(v, a, false, 8, 0);
            if (res.kind != AccessOutcome::Ok) {
                ++g.faults;
                sys_->gear1.guest_trap(p, ExitReason{ExitReason::Stage2Perm, a});
                return;
            }
        }
        ctx.sys.program_point += 1;
        sys_->guest_continue(p, count * cm.mem_touch_ns + cm.guest_op_ns);
        return;
    }

    case Instr::KickWatchdog:
        sys_->supervision.kick(Layer::L1RS, "vm:" + std::to_string(v.vm));
        sys_->gear1.guest_hypercall(p, static_cast<u32>(HypercallId::WatchdogKick), 0, 0, 0);
        return;

    case Instr::LoopTo: {
        u64& taken = g.loops_taken[pp];
        if (in.b == 0 || taken < in.b) {
            if (in.b != 0)
                ++taken;
            ctx.sys.program_point = in.a;
        } else {
            taken = 0;
            ctx.sys.program_point += 1;
        }
        sys_->guest_continue(p, cm.guest_op_ns);
        return;
    }
    }
}

} // namespace gearsim
