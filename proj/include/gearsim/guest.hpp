/*
 * Copyright (c) 2026 the gearsim authors.
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gearsim/types.hpp"

namespace gearsim {

class System;

struct Instr {
    enum Op : u8 {
        Compute,      // a = nanoseconds
        Mmio,         // a = addr, b = value, c = size; write/blocking flags
        Hypercall,    // a = id, b..d = args
        ArmTimer,     // a = delta ns
        Wfi,
        MemTouch,     // a = ipa, b = stride, c = count
        KickWatchdog,
        LoopTo,       // a = target index, b = times (0 = unbounded)
    } op = Wfi;
    u64 a = 0, b = 0, c = 0, d = 0;
    bool write = false;
    bool blocking = true;
};

struct WorkloadProgram {
    std::vector<Instr> code;
};

/// Text form used in scenario files, e.g. "compute 4000000",
/// "mmio 0x9000000 w nb 0x55", "loop_to 0 0". See docs/workloads.md.
Instr parse_instr(const std::string& text);
WorkloadProgram parse_program(const std::vector<std::string>& lines);
std::string format_instr(const Instr& in);

enum class ProfileKind : u8 { IoBound, CpuBound };

/// Guest-kernel wakeup-overhead parameter set for the cyclictest analog.
struct GuestProfile {
    std::string name = "xenomai";
    u64 wake_min_ns = 1000;
    u64 wake_max_ns = 38000;     // native worst case
    double contention_scale = 1.0;
};

GuestProfile xenomai_profile();
GuestProfile preempt_rt_profile();

struct RtTask {
    u64 period_ns = 1'000'000;
    GuestProfile profile;
    u64 contention_worst_ns = 0; // 0 when no background disturbance
    u64 sample_pc = 0;           // instruction index where the task body runs
    u64 spike_wake = 0;          // designated worst-case wake index
    u64 wakes = 0;
    bool sample_pending = false;
    u64 expected_wake = 0;
    std::vector<u64> samples;
};

struct LatencyStats {
    u64 min_ns = 0;
    u64 avg_ns = 0;
    u64 max_ns = 0;
    u64 count = 0;
};

LatencyStats latency_stats(const std::vector<u64>& samples);

/// Per-vcpu interpreter state.
struct GuestVcpu {
    WorkloadProgram prog;
    std::map<u64, u64> loops_taken; // LoopTo site -> taken count
    u64 compute_remaining = 0;
    SimTime compute_started = 0;
    bool in_compute = false;
    bool compute_running = false; // the block is actively scheduled
    bool ended = false;
    u64 instrs_executed = 0;
    u64 faults = 0;
    std::optional<RtTask> rt;
    bool stalled = false; // induced failure: stops executing
};

/*
 * Synthetic guests: a tiny deterministic workload interpreter stepped by
 * the event loop, profile generators and the cyclictest-analog task.
 */
class GuestMgr {
public:
    void attach(System& sys) { sys_ = &sys; }

    void assign(VcpuRef v, WorkloadProgram prog);
    GuestVcpu& guest(VcpuRef v) { return guests_.at(v); }
    bool has_guest(VcpuRef v) const { return guests_.count(v) != 0; }

    /// Execute one instruction of the guest running on p. Called from the
    /// per-pcpu chain; schedules its own continuation.
    void step(PcpuId p, VcpuRef v);

    /// Pending-virq delivery hook; returns the guest-side wake cost
    /// (cyclictest tasks draw their wakeup overhead here).
    u64 on_virq_delivered(VcpuRef v, IrqLine line);

    /// Interrupted mid-compute: bank the consumed nanoseconds.
    void preempt_compute(VcpuRef v);

    void reset_vm(VmId vm);

    /// Profile generators matching the measured interrupt frequencies:
    /// IoBound arms a streaming device at 12346/s, CpuBound ticks at 250/s.
    static WorkloadProgram make_profile(ProfileKind kind, u64 duration_ns,
                                        Addr io_dev_base = 0);
    static constexpr u64 kIoBoundRateHz = 12346;
    static constexpr u64 kCpuBoundRateHz = 250;

    /// Cyclictest-analog program: ArmTimer(period); Wfi; two GIC cpu-interface
    /// ops (pass-through or trapped depending on the manifest); task body.
    static WorkloadProgram make_cyclictest(u64 period_ns, Addr gicc_base);
    void attach_rt_task(VcpuRef v, RtTask task);
    const RtTask* rt_task(VcpuRef v) const;

private:
    void exit_end(PcpuId p, VcpuRef v);

    System* sys_ = nullptr;
    std::map<VcpuRef, GuestVcpu> guests_;
};

} // namespace gearsim
