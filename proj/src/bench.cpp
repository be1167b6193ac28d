/*
 * Copyright (c) 2026 the gearsim authors.
 * SPDX-License-Identifier: Apache-2.0
 */
#include "gearsim/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

namespace gearsim {

using nlohmann::json;

// --------------------------------------------------------- trace helpers

double mean_cost(const Trace& t, Action action, ActorKind actor) {
    u64 sum = 0, n = 0;
    for (const TraceRecord& r : t) {
        if (r.action == action && r.actor.kind == actor) {
            sum += r.cost;
            ++n;
        }
    }
    return n ? static_cast<double>(sum) / static_cast<double>(n) : 0.0;
}

u64 sum_cost_by_cause(const Trace& t, Cause cause) {
    u64 sum = 0;
    for (const TraceRecord& r : t)
        if (r.cause == cause)
            sum += r.cost;
    return sum;
}

u64 count_action(const Trace& t, Action action) {
    u64 n = 0;
    for (const TraceRecord& r : t)
        if (r.action == action)
            ++n;
    return n;
}

namespace {

// mean delta between a start record and the first matching end record
struct LatencyScan {
    double mean = 0;
    u64 rounds = 0;
};

template <typename StartPred, typename EndPred>
LatencyScan scan_latency(const Trace& t, StartPred start, EndPred end, u64 skip_warmup = 1) {
    u64 sum = 0, n = 0, skipped = 0;
    std::optional<SimTime> t0;
    for (const TraceRecord& r : t) {
        if (!t0 && start(r)) {
            t0 = r.at;
            continue;
        }
        if (t0 && end(r)) {
            if (skipped < skip_warmup) {
                ++skipped;
            } else {
                sum += r.at - *t0;
                ++n;
            }
            t0.reset();
        }
    }
    LatencyScan out;
    out.rounds = n;
    if (n)
        out.mean = static_cast<double>(sum) / static_cast<double>(n);
    return out;
}

ScenarioConfig base_platform(u32 pcpus, const CostModel& cm, u64 seed) {
    ScenarioConfig cfg;
    cfg.cost_model = cm;
    cfg.seed = seed;
    for (u32 i = 0; i < pcpus; ++i)
        cfg.platform.pcpus.push_back({i, i < 4 ? Cluster::Big : Cluster::Little});
    cfg.platform.ram_pages = 8192;
    return cfg;
}

MemRegion ram_slice(const ScenarioConfig& cfg, u64 index, u64 pages = 64) {
    Addr base = cfg.platform.ram_base +
                (cfg.platform.gear1_reserved_pages + index * pages) * kPageSize;
    return {base, pages * kPageSize};
}

std::vector<std::string> program_lines(const WorkloadProgram& prog) {
    std::vector<std::string> out;
    for (const Instr& in : prog.code)
        out.push_back(format_instr(in));
    return out;
}

constexpr Addr kDevBase = 0x0900'0000;

} // namespace

// ------------------------------------------------------------------ micro

const char* micro_name(MicroBench m) {
    switch (m) {
    case MicroBench::Hypercall: return "hypercall";
    case MicroBench::WorldSwitch: return "world_switch";
    case MicroBench::VmTrap: return "vm_trap";
    case MicroBench::Ipi: return "ipi";
    case MicroBench::IoOut: return "io_out";
    }
    return "?";
}

ScenarioConfig micro_scenario(MicroBench which, const CostModel& cm, u64 seed) {
    switch (which) {
    case MicroBench::Hypercall:
    case MicroBench::WorldSwitch:
    case MicroBench::VmTrap: {
        ScenarioConfig cfg = base_platform(2, cm, seed);
        cfg.name = std::string("micro_") + micro_name(which);
        cfg.duration_ns = 20'000'000;
        VmManifest prim{0, VmKind::Primary, 1, {0}, {ram_slice(cfg, 0)}, {}, {}, ~0ull, 0, true};
        VmManifest gvm{1, VmKind::Secondary, 1, {1}, {ram_slice(cfg, 1)}, {}, {}, ~0ull, 0, true};
        cfg.vms = {prim, gvm};
        WorkloadAssign w{1, 0, {}};
        if (which == MicroBench::VmTrap) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "mmio 0x%llx r",
                          static_cast<unsigned long long>(cfg.platform.gicd_base + kGicdCtlr));
            w.program = {buf, "compute 20000", "loop_to 0 0"};
        } else {
            w.program = {"hypercall 7", "compute 20000", "loop_to 0 0"};
        }
        cfg.workloads = {w};
        return cfg;
    }
    case MicroBench::Ipi: {
        ScenarioConfig cfg = base_platform(3, cm, seed);
        cfg.name = "micro_ipi";
        cfg.duration_ns = 20'000'000;
        VmManifest prim{0, VmKind::Primary, 1, {0}, {ram_slice(cfg, 0)}, {}, {}, ~0ull, 0, true};
        VmManifest gvm{1, VmKind::Secondary, 2, {1, 2},
                       {ram_slice(cfg, 1)}, {}, {}, ~0ull, 0, true};
        cfg.vms = {prim, gvm};
        // sender on pcpu1 pokes SGIR toward its sibling on pcpu2
        u64 sgir_value = 3 | (4ull << 16); // line 3, target pcpu2
        char buf[64];
        std::snprintf(buf, sizeof(buf), "mmio 0x%llx w 0x%llx",
                      static_cast<unsigned long long>(cfg.platform.gicd_base + kGicdSgir),
                      static_cast<unsigned long long>(sgir_value));
        cfg.workloads = {
            {1, 0, {buf, "compute 50000", "loop_to 0 0"}},
            {1, 1, {"wfi", "loop_to 0 0"}},
        };
        return cfg;
    }
    case MicroBench::IoOut: {
        ScenarioConfig cfg = base_platform(3, cm, seed);
        cfg.name = "micro_io_out";
        cfg.duration_ns = 40'000'000;
        DeviceConfig blk{"blk0", kDevBase, 0x1000, 40, DeviceKind::Block, 0};
        cfg.platform.devices = {blk};
        VmManifest prim{0, VmKind::Primary, 1, {0}, {ram_slice(cfg, 0)}, {}, {}, ~0ull, 0, true};
        VmManifest gvm{1, VmKind::Secondary, 1, {1}, {ram_slice(cfg, 1)},
                       {{kDevBase, 0x1000}}, {}, ~0ull, 0, true};
        VmManifest dvm{2, VmKind::Dvm, 1, {2}, {ram_slice(cfg, 2)}, {}, {}, ~0ull, 0, true};
        cfg.vms = {prim, gvm, dvm};
        char buf[64];
        std::snprintf(buf, sizeof(buf), "mmio 0x%llx w 0x55 8",
                      static_cast<unsigned long long>(kDevBase + 0x100));
        cfg.workloads = {
            {1, 0, {buf, "compute 60000", "loop_to 0 0"}},
            {2, 0, {"wfi", "loop_to 0 0"}},
        };
        return cfg;
    }
    }
    throw std::logic_error("unreachable");
}

MicroResult run_microbench(MicroBench which, const CostModel& cm, u64 seed) {
    ScenarioConfig cfg = micro_scenario(which, cm, seed);
    System sys(cfg);
    const Trace& t = sys.run();
    MicroResult r;
    r.name = micro_name(which);
    switch (which) {
    case MicroBench::Hypercall:
        r.measured_ns = mean_cost(t, Action::Hypercall, ActorKind::Vm);
        r.target_ns = static_cast<double>(cm.hypercall_ns);
        r.rounds = 0;
        for (const TraceRecord& rec : t)
            if (rec.action == Action::Hypercall && rec.actor.kind == ActorKind::Vm)
                ++r.rounds;
        break;
    case MicroBench::WorldSwitch:
        r.measured_ns = mean_cost(t, Action::WorldSwitch, ActorKind::Gear1);
        r.target_ns = static_cast<double>(cm.world_switch_ns);
        r.rounds = count_action(t, Action::WorldSwitch);
        break;
    case MicroBench::VmTrap:
        r.measured_ns = mean_cost(t, Action::VmTrap, ActorKind::Gear1);
        r.target_ns = static_cast<double>(cm.vm_trap_ns);
        r.rounds = count_action(t, Action::VmTrap);
        break;
    case MicroBench::Ipi: {
        // send (GICD trap) -> the receiving vcpu takes delivery
        auto scan = scan_latency(
            t,
            [](const TraceRecord& rec) {
                return rec.action == Action::VmTrap &&
                       rec.arg[2] == ExitReason::GicdAccess;
            },
            [](const TraceRecord& rec) {
                return rec.action == Action::VirqDelivered && rec.arg[0] == 1 &&
                       rec.arg[1] == 1 && rec.arg[2] == 3;
            });
        r.measured_ns = scan.mean;
        r.rounds = scan.rounds;
        r.target_ns = 9928;
        break;
    }
    case MicroBench::IoOut: {
        // trigger trap -> ack received by gear2 (documented endpoint)
        auto scan = scan_latency(
            t,
            [](const TraceRecord& rec) {
                return rec.action == Action::VmTrap &&
                       (rec.arg[2] == ExitReason::MmioWrite ||
                        rec.arg[2] == ExitReason::MmioRead) &&
                       rec.arg[0] == 1;
            },
            [](const TraceRecord& rec) { return rec.action == Action::IoAck; });
        r.measured_ns = scan.mean;
        r.rounds = scan.rounds;
        r.target_ns = 8774;
        break;
    }
    }
    return r;
}

std::vector<MicroResult> run_all_microbench(const CostModel& cm, u64 seed) {
    std::vector<MicroResult> out;
    for (MicroBench m : {MicroBench::Hypercall, MicroBench::WorldSwitch, MicroBench::VmTrap,
                         MicroBench::Ipi, MicroBench::IoOut})
        out.push_back(run_microbench(m, cm, seed));
    return out;
}

// --------------------------------------------------------------- overhead

double estimate_gear2_overhead(double int_freq_hz, double ws_cost_s) {
    return int_freq_hz * ws_cost_s * 2.0;
}

u64 rounded_ws_ns(u64 world_switch_ns) {
    return (world_switch_ns + 99) / 100 * 100;
}

ScenarioConfig overhead_scenario(ProfileKind kind, const CostModel& cm, u64 duration_ns,
                                 u64 seed) {
    ScenarioConfig cfg = base_platform(2, cm, seed);
    cfg.duration_ns = duration_ns;
    if (kind == ProfileKind::IoBound) {
        cfg.name = "overhead_io_bound";
        DeviceConfig ssd{"ssd", kDevBase, 0x1000, 40, DeviceKind::Block,
                         GuestMgr::kIoBoundRateHz};
        cfg.platform.devices = {ssd};
        VmManifest prim{0, VmKind::Primary, 1, {0}, {ram_slice(cfg, 0)}, {}, {}, ~0ull, 0, true};
        VmManifest dvm{1, VmKind::Dvm, 1, {1}, {ram_slice(cfg, 1)}, {}, {"ssd"}, ~0ull, 0, true};
        cfg.vms = {prim, dvm};
        cfg.workloads = {
            {1, 0, program_lines(GuestMgr::make_profile(ProfileKind::IoBound, duration_ns,
                                                        kDevBase))}};
    } else {
        cfg.name = "overhead_cpu_bound";
        VmManifest prim{0, VmKind::Primary, 1, {0}, {ram_slice(cfg, 0)}, {}, {}, ~0ull, 0, true};
        VmManifest gvm{1, VmKind::Secondary, 1, {1}, {ram_slice(cfg, 1)}, {}, {}, ~0ull, 0, true};
        cfg.vms = {prim, gvm};
        cfg.workloads = {
            {1, 0, program_lines(GuestMgr::make_profile(ProfileKind::CpuBound, duration_ns))}};
    }
    return cfg;
}

OverheadReport measure_gear2_overhead(ProfileKind kind, const CostModel& cm, u64 duration_ns,
                                      u64 seed) {
    ScenarioConfig cfg = overhead_scenario(kind, cm, duration_ns, seed);
    System sys(cfg);
    const Trace& t = sys.run();

    OverheadReport r;
    r.profile = kind == ProfileKind::IoBound ? "io_bound" : "cpu_bound";
    r.duration_ns = duration_ns;
    r.nominal_freq_hz = kind == ProfileKind::IoBound
                            ? static_cast<double>(GuestMgr::kIoBoundRateHz)
                            : static_cast<double>(GuestMgr::kCpuBoundRateHz);
    u64 interrupts = kind == ProfileKind::IoBound
                         ? count_action(t, Action::IrqRaised)
                         : sys.machine.timer_virqs();
    r.interrupts = interrupts;
    r.measured_freq_hz =
        static_cast<double>(interrupts) * 1e9 / static_cast<double>(duration_ns);
    r.ws_cost_s = static_cast<double>(rounded_ws_ns(cm.world_switch_ns)) * 1e-9;
    r.estimated = estimate_gear2_overhead(r.nominal_freq_hz, r.ws_cost_s);
    r.attributed_ns = sum_cost_by_cause(t, Cause::IrqFwd);
    r.measured = static_cast<double>(r.attributed_ns) / static_cast<double>(duration_ns);
    return r;
}

// ----------------------------------------------------------------- jitter

const char* jitter_config_name(JitterConfigKind k) {
    switch (k) {
    case JitterConfigKind::Native: return "native";
    case JitterConfigKind::KvmLikeRtVm: return "kvm_like_rt_vm";
    case JitterConfigKind::GearvNonRtVm: return "gearv_non_rt_vm";
    case JitterConfigKind::GearvRtVmVgicEmul: return "gearv_rt_vm_vgic_emul";
    case JitterConfigKind::GearvRtVmPassthrough: return "gearv_rt_vm_passthrough";
    }
    return "?";
}

namespace {

u64 shaped_base(Prng& prng, const GuestProfile& pr) {
    double u = prng.next_double();
    double s = u * u;
    s *= s;
    s *= s; // u^8
    return pr.wake_min_ns +
           static_cast<u64>(s * static_cast<double>(pr.wake_max_ns - pr.wake_min_ns - 1));
}

JitterEntry run_jitter_model(JitterConfigKind kind, const JitterParams& jp, u64 seed) {
    // Native and the KVM-like baseline are cost-profile models: per-wake
    // draws on the engine, no hypervisor machinery.
    Engine eng(seed);
    u64 wakes = jp.duration_ns / jp.period_ns;
    if (wakes == 0)
        wakes = 1;
    u64 spike = eng.prng().next_below(wakes);
    std::vector<u64> samples;
    samples.reserve(wakes);
    const bool kvm = kind == JitterConfigKind::KvmLikeRtVm;
    u64 kvm_fixed = jp.kvm.vm_trap_ns + 2 * jp.kvm.world_switch_ns;

    for (u64 i = 0; i < wakes; ++i) {
        SimTime at = (i + 1) * jp.period_ns;
        eng.schedule(at, EventKind::TimerFire, [&, i] {
            u64 base = i == spike ? jp.guest.wake_max_ns : shaped_base(eng.prng(), jp.guest);
            u64 lat = base;
            if (kvm) {
                lat += kvm_fixed;
                if (i == spike) {
                    lat += jp.kvm.host_noise_worst_ns;
                } else {
                    double u = eng.prng().next_double();
                    u *= u;
                    u *= u;
                    lat += static_cast<u64>(u * static_cast<double>(jp.kvm.host_noise_typ_ns));
                }
            }
            VcpuRef v{kvm ? 1u : 0u, 0};
            eng.record(Actor::guest(v), Action::RtWakeCost, lat,
                       {v.vm, v.vcpu, static_cast<i64>(lat)});
            eng.record(Actor::guest(v), Action::RtWake, 0,
                       {v.vm, v.vcpu, static_cast<i64>(lat), static_cast<i64>(at)});
            samples.push_back(lat);
        });
    }
    eng.run_until(jp.duration_ns + jp.period_ns);

    JitterEntry e;
    e.kind = kind;
    e.stats = latency_stats(samples);
    e.trace_hash = trace_hash(eng.trace());
    return e;
}

} // namespace

ScenarioConfig jitter_scenario(JitterConfigKind kind, const JitterParams& jp,
                               const CostModel& cm, u64 seed) {
    if (kind == JitterConfigKind::Native || kind == JitterConfigKind::KvmLikeRtVm)
        throw std::invalid_argument("modelled configs have no scenario");

    const bool nonrt = kind == JitterConfigKind::GearvNonRtVm;
    ScenarioConfig cfg = base_platform(nonrt ? 3 : 3, cm, seed);
    cfg.name = std::string("jitter_") + jitter_config_name(kind);
    cfg.duration_ns = jp.duration_ns;
    cfg.seed = seed;

    // background disturbance: a DVM-resident streaming disk writer
    DeviceConfig disk{"disk", kDevBase, 0x1000, 40, DeviceKind::Block,
                      GuestMgr::kIoBoundRateHz};
    cfg.platform.devices = {disk};

    VmManifest prim{0, VmKind::Primary, 1, {0}, {ram_slice(cfg, 0)}, {}, {}, ~0ull, 0, true};
    VmManifest dvm{2, VmKind::Dvm, 1, {2}, {ram_slice(cfg, 2)}, {}, {"disk"}, ~0ull, 0, true};
    cfg.vms = {prim, dvm};
    cfg.workloads.push_back(
        {2, 0, program_lines(GuestMgr::make_profile(ProfileKind::IoBound, jp.duration_ns,
                                                    kDevBase))});

    WorkloadProgram cyc = GuestMgr::make_cyclictest(jp.period_ns, cfg.platform.gicc_base);
    if (nonrt) {
        VmManifest rt{1, VmKind::Secondary, 1, {1}, {ram_slice(cfg, 1)}, {}, {}, ~0ull, 0, true};
        cfg.vms.push_back(rt);
        // busy competitors sharing the pcpu, chunk lengths decorrelated per vm
        Prng p(seed ^ 0xC0FFEE);
        for (u32 i = 0; i < jp.nonrt_competitors; ++i) {
            VmId id = 10 + i;
            VmManifest busy{id, VmKind::Secondary, 1, {1},
                            {ram_slice(cfg, 3 + i)}, {}, {}, ~0ull, 0, true};
            cfg.vms.push_back(busy);
            u64 chunk = cfg.sched.quantum_ns * (980 + p.next_below(41)) / 1000;
            cfg.workloads.push_back(
                {id, 0, {"compute " + std::to_string(chunk), "loop_to 0 0"}});
        }
        cfg.workloads.push_back({1, 0, program_lines(cyc)});
    } else {
        VmManifest rt{1, VmKind::Rtvm, 1, {1}, {ram_slice(cfg, 1)}, {}, {}, ~0ull, 0,
                      kind == JitterConfigKind::GearvRtVmPassthrough};
        cfg.vms.push_back(rt);
        cfg.workloads.push_back({1, 0, program_lines(cyc)});
    }
    return cfg;
}

JitterEntry run_jitter(JitterConfigKind kind, const JitterParams& jp, const CostModel& cm,
                       u64 seed) {
    if (kind == JitterConfigKind::Native || kind == JitterConfigKind::KvmLikeRtVm)
        return run_jitter_model(kind, jp, seed);

    ScenarioConfig cfg = jitter_scenario(kind, jp, cm, seed);
    System sys(cfg);
    sys.boot();

    RtTask task;
    task.period_ns = jp.period_ns;
    task.profile = jp.guest;
    task.contention_worst_ns = jp.contention_worst_ns;
    task.sample_pc = 4; // the task body after WFI + the two GIC ops
    u64 expected_wakes = std::max<u64>(1, jp.duration_ns / jp.period_ns * 9 / 10);
    task.spike_wake = sys.engine.prng().next_below(expected_wakes);
    VcpuRef rt_vcpu{1, 0};
    sys.guests.attach_rt_task(rt_vcpu, task);

    const Trace& t = sys.run();
    (void)t;

    JitterEntry e;
    e.kind = kind;
    e.stats = latency_stats(sys.guests.rt_task(rt_vcpu)->samples);
    e.vm_exits = sys.gear1.vm_exits(1);
    e.gicd_traps = sys.gear1.gicd_traps(1);
    e.trace_hash = trace_hash(sys.engine.trace());
    return e;
}

JitterReport run_jitter_suite(const JitterParams& jp, const CostModel& cm, u64 seed) {
    JitterReport rep;
    rep.profile = jp.guest.name;
    const JitterConfigKind kinds[5] = {
        JitterConfigKind::Native, JitterConfigKind::KvmLikeRtVm, JitterConfigKind::GearvNonRtVm,
        JitterConfigKind::GearvRtVmVgicEmul, JitterConfigKind::GearvRtVmPassthrough};
    for (int i = 0; i < 5; ++i)
        rep.entries[i] = run_jitter(kinds[i], jp, cm, seed);

    double native_max = static_cast<double>(rep.entries[0].stats.max_ns);
    for (JitterEntry& e : rep.entries)
        e.normalized = native_max > 0 ? static_cast<double>(e.stats.max_ns) / native_max : 0;

    u64 mx_native = rep.entries[0].stats.max_ns;
    u64 mx_kvm = rep.entries[1].stats.max_ns;
    u64 mx_nonrt = rep.entries[2].stats.max_ns;
    u64 mx_emul = rep.entries[3].stats.max_ns;
    u64 mx_pass = rep.entries[4].stats.max_ns;
    rep.ordering_ok =
        mx_native <= mx_pass && mx_pass < mx_emul && mx_emul < mx_kvm && mx_kvm < mx_nonrt;
    return rep;
}

// ------------------------------------------------------------ calibration

CalibrationResult calibrate(const CostModel& base, double ipi_target_ns, double io_out_target_ns,
                            u64 seed) {
    CalibrationResult out;
    out.ipi_target_ns = ipi_target_ns;
    out.io_out_target_ns = io_out_target_ns;

    CostModel work = base;
    work.virq_inject_ns = 600; // pinned convention: sub-us list-register update
    work.gicd_emul_ns = 0;
    work.gdm_user_hop_ns = 0;

    MicroResult ipi0 = run_microbench(MicroBench::Ipi, work, seed);
    out.ipi_before_ns = ipi0.measured_ns;
    double g = ipi_target_ns - ipi0.measured_ns;
    work.gicd_emul_ns = g > 0 ? static_cast<u64>(g + 0.5) : 0;

    MicroResult io0 = run_microbench(MicroBench::IoOut, work, seed);
    out.io_out_before_ns = io0.measured_ns;
    double h = io_out_target_ns - io0.measured_ns;
    work.gdm_user_hop_ns = h > 0 ? static_cast<u64>(h + 0.5) : 0;

    out.fitted = work;
    out.ipi_after_ns = run_microbench(MicroBench::Ipi, work, seed).measured_ns;
    out.io_out_after_ns = run_microbench(MicroBench::IoOut, work, seed).measured_ns;
    return out;
}

// -------------------------------------------------------- other scenarios

ScenarioConfig rtvm_scenario(u64 gicd_ops, const CostModel& cm, u64 seed) {
    ScenarioConfig cfg = base_platform(2, cm, seed);
    cfg.name = "rtvm_containment";
    cfg.duration_ns = 1'000'000'000;
    VmManifest prim{0, VmKind::Primary, 1, {0}, {ram_slice(cfg, 0)}, {}, {}, ~0ull, 0, true};
    VmManifest rtvm{1, VmKind::Rtvm, 1, {1}, {ram_slice(cfg, 1)}, {}, {}, ~0ull, 0, true};
    cfg.vms = {prim, rtvm};
    std::vector<std::string> prog;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "mmio 0x%llx r",
                  static_cast<unsigned long long>(cfg.platform.gicd_base + kGicdCtlr));
    for (u64 i = 0; i < gicd_ops; ++i) {
        prog.push_back("compute 100000");
        prog.push_back(buf);
    }
    prog.push_back("compute 1000000");
    prog.push_back("wfi"); // parks with nothing armed
    cfg.workloads = {{1, 0, prog}};
    return cfg;
}

ScenarioConfig coloring_scenario(bool disjoint_masks, const CostModel& cm, u64 seed) {
    ScenarioConfig cfg = base_platform(3, cm, seed);
    cfg.name = disjoint_masks ? "coloring_disjoint" : "coloring_shared";
    cfg.duration_ns = 50'000'000;
    u32 colors = cfg.platform.llc.sets * cfg.platform.llc.line_bytes / kPageSize; // 32
    u64 low_mask = (1ull << (colors / 2)) - 1;
    u64 high_mask = ((1ull << colors) - 1) & ~low_mask;
    u64 mask1 = disjoint_masks ? low_mask : low_mask;
    u64 mask2 = disjoint_masks ? high_mask : low_mask;

    Addr pool = cfg.platform.ram_base + cfg.platform.gear1_reserved_pages * kPageSize;
    u64 pool_pages = cfg.platform.ram_pages - cfg.platform.gear1_reserved_pages;
    auto r1 = Gear1::allocate_colored(pool, pool_pages / 2, 64, mask1, colors);
    auto r2 = Gear1::allocate_colored(pool + pool_pages / 2 * kPageSize, pool_pages / 2, 64,
                                      mask2, colors);

    VmManifest prim{0, VmKind::Primary, 1, {0}, {}, {}, {}, ~0ull, 0, true};
    VmManifest a{1, VmKind::Secondary, 1, {1}, r1, {}, {}, mask1, 0, true};
    VmManifest b{2, VmKind::Secondary, 1, {2}, r2, {}, {}, mask2, 0, true};
    cfg.vms = {prim, a, b};

    auto touch_prog = [&](const std::vector<MemRegion>& rs) {
        std::vector<std::string> prog;
        char buf[96];
        for (const MemRegion& r : rs) {
            u64 lines = std::min<u64>(r.len / 64, 512);
            std::snprintf(buf, sizeof(buf), "mem_touch 0x%llx 64 %llu",
                          static_cast<unsigned long long>(r.start),
                          static_cast<unsigned long long>(lines));
            prog.push_back(buf);
        }
        prog.push_back("compute 100000");
        prog.push_back("loop_to 0 0");
        return prog;
    };
    cfg.workloads = {{1, 0, touch_prog(r1)}, {2, 0, touch_prog(r2)}};
    return cfg;
}

ScenarioConfig toy_cache_scenario(const CostModel& cm, u64 seed) {
    ScenarioConfig cfg = base_platform(3, cm, seed);
    cfg.name = "coloring_toy_overload";
    cfg.duration_ns = 5'000'000;
    cfg.platform.llc = LlcConfig{2, 2, 64}; // 2 sets, 2 ways: overload is easy
    VmManifest prim{0, VmKind::Primary, 1, {0}, {ram_slice(cfg, 0)}, {}, {}, ~0ull, 0, true};
    VmManifest a{1, VmKind::Secondary, 1, {1}, {ram_slice(cfg, 1)}, {}, {}, ~0ull, 0, true};
    VmManifest b{2, VmKind::Secondary, 1, {2}, {ram_slice(cfg, 2)}, {}, {}, ~0ull, 0, true};
    cfg.vms = {prim, a, b};
    // working set of 3 lines per set per vm > 2 ways
    auto prog = [&](const MemRegion& r) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "mem_touch 0x%llx 64 6",
                      static_cast<unsigned long long>(r.start));
        return std::vector<std::string>{buf, "compute 5000", "loop_to 0 0"};
    };
    cfg.workloads = {{1, 0, prog(a.mem_regions[0])}, {2, 0, prog(b.mem_regions[0])}};
    return cfg;
}

ScenarioConfig fairness_scenario(const CostModel& cm, u64 seed, u32 threads) {
    ScenarioConfig cfg = base_platform(2, cm, seed);
    cfg.name = "rr_fairness";
    // 300 quantum expiries plus boot slack
    cfg.duration_ns = cfg.sched.quantum_ns * 302 + 10'000'000;
    VmManifest prim{0, VmKind::Primary, 1, {0}, {ram_slice(cfg, 0)}, {}, {}, ~0ull, 0, true};
    cfg.vms = {prim};
    for (u32 i = 0; i < threads; ++i) {
        VmId id = 1 + i;
        VmManifest m{id, VmKind::Secondary, 1, {1}, {ram_slice(cfg, 1 + i)}, {}, {}, ~0ull, 0,
                     true};
        cfg.vms.push_back(m);
        cfg.workloads.push_back({id, 0, {"compute 10000000000", "loop_to 0 0"}});
    }
    return cfg;
}

ScenarioConfig supervision_scenario(bool stall_vm, bool stall_gear2, const CostModel& cm,
                                    u64 seed) {
    ScenarioConfig cfg = base_platform(3, cm, seed);
    cfg.name = "supervision";
    cfg.duration_ns = 10'000'000'000ull;
    cfg.supervision.enabled = true;
    VmManifest prim{0, VmKind::Primary, 1, {0}, {ram_slice(cfg, 0)}, {}, {}, ~0ull, 0, true};
    VmManifest a{1, VmKind::Secondary, 1, {1}, {ram_slice(cfg, 1)}, {}, {},
                 ~0ull, 250'000'000, true};
    VmManifest b{2, VmKind::Secondary, 1, {2}, {ram_slice(cfg, 2)}, {}, {},
                 ~0ull, 250'000'000, true};
    cfg.vms = {prim, a, b};
    // healthy guests kick well inside the period
    std::vector<std::string> prog = {"compute 50000000", "kick_watchdog", "loop_to 0 0"};
    cfg.workloads = {{1, 0, prog}, {2, 0, prog}};
    if (stall_vm) {
        cfg.stall_vms = {2};
        cfg.vm_stall_at = 3'000'000'000ull;
    }
    if (stall_gear2)
        cfg.gear2_stall_at = 4'000'000'000ull;
    return cfg;
}

ScenarioConfig ioflow_scenario(const CostModel& cm, u64 seed, u64 requests, bool blocking,
                               u32 ring_depth) {
    ScenarioConfig cfg = base_platform(3, cm, seed);
    cfg.name = "ioflow";
    cfg.duration_ns = 1'000'000'000;
    cfg.dvm_ring_depth = ring_depth;
    DeviceConfig blk{"blk0", kDevBase, 0x2000, 40, DeviceKind::Block, 0};
    cfg.platform.devices = {blk};
    VmManifest prim{0, VmKind::Primary, 1, {0}, {ram_slice(cfg, 0)}, {}, {}, ~0ull, 0, true};
    VmManifest gvm{1, VmKind::Secondary, 1, {1}, {ram_slice(cfg, 1)},
                   {{kDevBase, 0x2000}}, {}, ~0ull, 0, true};
    VmManifest dvm{2, VmKind::Dvm, 1, {2}, {ram_slice(cfg, 2)}, {}, {}, ~0ull, 0, true};
    cfg.vms = {prim, gvm, dvm};
    std::vector<std::string> prog;
    char buf[96];
    for (u64 i = 0; i < requests; ++i) {
        std::snprintf(buf, sizeof(buf), "mmio 0x%llx w%s 0x%llx 8",
                      static_cast<unsigned long long>(kDevBase + 0x100 + 8 * (i % 64)),
                      blocking ? "" : " nb", static_cast<unsigned long long>(i + 1));
        prog.push_back(buf);
        if (!blocking && (i % 8) == 7)
            prog.push_back("compute 200000"); // let the backend drain
    }
    prog.push_back("compute 5000000");
    prog.push_back("wfi");
    cfg.workloads = {{1, 0, prog}, {2, 0, {"wfi", "loop_to 0 0"}}};
    return cfg;
}

// ---------------------------------------------------------------- reports

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string summary_csv(const System::Summary& s) {
    std::ostringstream os;
    os << "key,value\n";
    os << "scenario," << s.scenario << "\n";
    os << "seed," << s.seed << "\n";
    os << "duration_ns," << s.duration_ns << "\n";
    os << "events," << s.events << "\n";
    os << "records," << s.records << "\n";
    os << "irqs_raised," << s.irqs_raised << "\n";
    os << "world_switches," << s.world_switches << "\n";
    os << "supervision_events," << s.supervision_events << "\n";
    os << "llc_hits," << s.llc_hits << "\n";
    os << "llc_cold," << s.llc_cold << "\n";
    os << "llc_self_conflict," << s.llc_self_conflict << "\n";
    os << "llc_cross_conflict," << s.llc_cross_conflict << "\n";
    os << "trace_hash," << s.trace_hash << "\n";
    return os.str();
}

std::string summary_json(const System::Summary& s) {
    json j;
    j["scenario"] = s.scenario;
    j["seed"] = s.seed;
    j["duration_ns"] = s.duration_ns;
    j["events"] = s.events;
    j["records"] = s.records;
    j["irqs_raised"] = s.irqs_raised;
    j["world_switches"] = s.world_switches;
    j["supervision_events"] = s.supervision_events;
    j["llc"] = {{"hits", s.llc_hits},
                {"cold", s.llc_cold},
                {"self_conflict", s.llc_self_conflict},
                {"cross_conflict", s.llc_cross_conflict}};
    j["trace_hash"] = s.trace_hash;
    return j.dump(2) + "\n";
}

std::string overhead_csv(const OverheadReport& r) {
    std::ostringstream os;
    os << "profile,nominal_freq_hz,measured_freq_hz,ws_cost_s,estimated,measured,interrupts,"
          "attributed_ns,duration_ns\n";
    os << r.profile << "," << fmt6(r.nominal_freq_hz) << "," << fmt6(r.measured_freq_hz) << ","
       << fmt6(r.ws_cost_s * 1e6) << "," << fmt6(r.estimated) << "," << fmt6(r.measured) << ","
       << r.interrupts << "," << r.attributed_ns << "," << r.duration_ns << "\n";
    return os.str();
}

std::string overhead_json(const OverheadReport& r) {
    json j;
    j["profile"] = r.profile;
    j["nominal_freq_hz"] = r.nominal_freq_hz;
    j["measured_freq_hz"] = r.measured_freq_hz;
    j["ws_cost_s"] = r.ws_cost_s;
    j["estimated"] = r.estimated;
    j["measured"] = r.measured;
    j["interrupts"] = r.interrupts;
    j["attributed_ns"] = r.attributed_ns;
    j["duration_ns"] = r.duration_ns;
    return j.dump(2) + "\n";
}

std::string micro_csv(const std::vector<MicroResult>& rs) {
    std::ostringstream os;
    os << "name,measured_ns,target_ns,rounds\n";
    for (const MicroResult& r : rs)
        os << r.name << "," << fmt6(r.measured_ns) << "," << fmt6(r.target_ns) << "," << r.rounds
           << "\n";
    return os.str();
}

std::string micro_json(const std::vector<MicroResult>& rs) {
    json arr = json::array();
    for (const MicroResult& r : rs) {
        json j;
        j["name"] = r.name;
        j["measured_ns"] = r.measured_ns;
        j["target_ns"] = r.target_ns;
        j["rounds"] = r.rounds;
        arr.push_back(j);
    }
    return arr.dump(2) + "\n";
}

std::string jitter_csv(const JitterReport& r) {
    std::ostringstream os;
    os << "profile,config,min_us,avg_us,max_us,normalized,vm_exits,gicd_traps\n";
    for (const JitterEntry& e : r.entries) {
        os << r.profile << "," << jitter_config_name(e.kind) << ","
           << fmt6(static_cast<double>(e.stats.min_ns) / 1000.0) << ","
           << fmt6(static_cast<double>(e.stats.avg_ns) / 1000.0) << ","
           << fmt6(static_cast<double>(e.stats.max_ns) / 1000.0) << "," << fmt6(e.normalized)
           << "," << e.vm_exits << "," << e.gicd_traps << "\n";
    }
    return os.str();
}

std::string jitter_json(const JitterReport& r) {
    json arr = json::array();
    for (const JitterEntry& e : r.entries) {
        json j;
        j["profile"] = r.profile;
        j["config"] = jitter_config_name(e.kind);
        j["min_ns"] = e.stats.min_ns;
        j["avg_ns"] = e.stats.avg_ns;
        j["max_ns"] = e.stats.max_ns;
        j["count"] = e.stats.count;
        j["normalized"] = e.normalized;
        j["vm_exits"] = e.vm_exits;
        j["gicd_traps"] = e.gicd_traps;
        j["trace_hash"] = e.trace_hash;
        arr.push_back(j);
    }
    json top;
    top["profile"] = r.profile;
    top["ordering_ok"] = r.ordering_ok;
    top["entries"] = arr;
    return top.dump(2) + "\n";
}

std::string cost_model_json(const CostModel& cm) {
    json j;
    j["hypercall_ns"] = cm.hypercall_ns;
    j["vm_trap_ns"] = cm.vm_trap_ns;
    j["world_switch_ns"] = cm.world_switch_ns;
    j["virq_inject_ns"] = cm.virq_inject_ns;
    j["gicd_emul_ns"] = cm.gicd_emul_ns;
    j["el3_hop_ns"] = cm.el3_hop_ns;
    j["gdm_user_hop_ns"] = cm.gdm_user_hop_ns;
    j["per_byte_copy_ns"] = cm.per_byte_copy_ns;
    j["guest_op_ns"] = cm.guest_op_ns;
    j["mem_touch_ns"] = cm.mem_touch_ns;
    return j.dump(2) + "\n";
}

} // namespace gearsim
