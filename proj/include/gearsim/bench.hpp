/*
 * Copyright (c) 2026 the gearsim authors.
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <array>
#include <string>
#include <vector>

#include "gearsim/guest.hpp"
#include "gearsim/scenario.hpp"
#include "gearsim/system.hpp"

namespace gearsim {

// ---------------------------------------------------------------- micro

enum class MicroBench { Hypercall, WorldSwitch, VmTrap, Ipi, IoOut };

struct MicroResult {
    std::string name;
    double measured_ns = 0;
    double target_ns = 0;
    u64 rounds = 0;
};

const char* micro_name(MicroBench m);

ScenarioConfig micro_scenario(MicroBench which, const CostModel& cm, u64 seed);
MicroResult run_microbench(MicroBench which, const CostModel& cm, u64 seed = 1);
std::vector<MicroResult> run_all_microbench(const CostModel& cm, u64 seed = 1);

// -------------------------------------------------------------- overhead

struct OverheadReport {
    std::string profile;
    double nominal_freq_hz = 0; // Formula-1 input (profile target rate)
    double measured_freq_hz = 0;
    double ws_cost_s = 0;       // rounded world-switch cost in seconds
    double estimated = 0;       // fraction of total time
    double measured = 0;        // attributed charges / duration
    u64 interrupts = 0;
    u64 attributed_ns = 0;
    u64 duration_ns = 0;
};

/// Formula 1: int_freq * ws_cost * 2, exactly.
double estimate_gear2_overhead(double int_freq_hz, double ws_cost_s);

/// The overhead estimate uses the world-switch cost rounded UP to the next
/// 0.1 us, matching the published arithmetic (1485 -> 1500 ns).
u64 rounded_ws_ns(u64 world_switch_ns);

ScenarioConfig overhead_scenario(ProfileKind kind, const CostModel& cm, u64 duration_ns,
                                 u64 seed);
OverheadReport measure_gear2_overhead(ProfileKind kind, const CostModel& cm,
                                      u64 duration_ns = 10'000'000'000ull, u64 seed = 1);

// ---------------------------------------------------------------- jitter

enum class JitterConfigKind : u8 {
    Native,
    KvmLikeRtVm,
    GearvNonRtVm,
    GearvRtVmVgicEmul,
    GearvRtVmPassthrough,
};

const char* jitter_config_name(JitterConfigKind k);

/// Reference cost profile for the KVM-like baseline (a cost model plus a
/// host-scheduling noise term, not a hypervisor implementation).
struct KvmCostProfile {
    u64 hypercall_ns = 3458;
    u64 vm_trap_ns = 4366;
    u64 world_switch_ns = 1729;
    u64 host_noise_worst_ns = 2'500'000;
    u64 host_noise_typ_ns = 100'000;
};

struct JitterParams {
    GuestProfile guest = xenomai_profile();
    KvmCostProfile kvm;
    u64 period_ns = 1'000'000;
    u64 contention_worst_ns = 2000; // background-disturbance worst case
    u64 duration_ns = 1'000'000'000;
    u32 nonrt_competitors = 4;
};

struct JitterEntry {
    JitterConfigKind kind = JitterConfigKind::Native;
    LatencyStats stats;
    double normalized = 0; // max / native max
    u64 vm_exits = 0;
    u64 gicd_traps = 0;
    std::string trace_hash;
};

struct JitterReport {
    std::string profile;
    std::array<JitterEntry, 5> entries;
    bool ordering_ok = false;
};

ScenarioConfig jitter_scenario(JitterConfigKind kind, const JitterParams& jp,
                               const CostModel& cm, u64 seed);
JitterEntry run_jitter(JitterConfigKind kind, const JitterParams& jp, const CostModel& cm,
                       u64 seed);
JitterReport run_jitter_suite(const JitterParams& jp, const CostModel& cm, u64 seed);

// ----------------------------------------------------------- calibration

struct CalibrationResult {
    CostModel fitted;
    double ipi_before_ns = 0;
    double io_out_before_ns = 0;
    double ipi_after_ns = 0;
    double io_out_after_ns = 0;
    double ipi_target_ns = 9928;
    double io_out_target_ns = 8774;
};

/// Fits virq_inject_ns (pinned convention), gicd_emul_ns and gdm_user_hop_ns
/// so the composed IPI and I/O-out paths hit their targets. Measures the
/// paths with the knobs zeroed and assigns the residuals.
CalibrationResult calibrate(const CostModel& base, double ipi_target_ns = 9928,
                            double io_out_target_ns = 8774, u64 seed = 1);

// ------------------------------------------------------- other scenarios

ScenarioConfig rtvm_scenario(u64 gicd_ops, const CostModel& cm, u64 seed);
ScenarioConfig coloring_scenario(bool disjoint_masks, const CostModel& cm, u64 seed);
ScenarioConfig toy_cache_scenario(const CostModel& cm, u64 seed);
ScenarioConfig fairness_scenario(const CostModel& cm, u64 seed, u32 threads = 3);
ScenarioConfig supervision_scenario(bool stall_vm, bool stall_gear2, const CostModel& cm,
                                    u64 seed);
ScenarioConfig ioflow_scenario(const CostModel& cm, u64 seed, u64 requests,
                               bool blocking = true, u32 ring_depth = 64);

// --------------------------------------------------------------- reports

std::string fmt6(double v); // fixed 6-decimal formatting for bit-exact CSVs

std::string summary_csv(const System::Summary& s);
std::string summary_json(const System::Summary& s);
std::string overhead_csv(const OverheadReport& r);
std::string overhead_json(const OverheadReport& r);
std::string micro_csv(const std::vector<MicroResult>& rs);
std::string micro_json(const std::vector<MicroResult>& rs);
std::string jitter_csv(const JitterReport& r);
std::string jitter_json(const JitterReport& r);
std::string cost_model_json(const CostModel& cm);

// trace scan helpers (also used by the test suites)
double mean_cost(const Trace& t, Action action, ActorKind actor);
u64 sum_cost_by_cause(const Trace& t, Cause cause);
u64 count_action(const Trace& t, Action action);

} // namespace gearsim
