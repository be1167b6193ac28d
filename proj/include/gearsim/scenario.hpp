/*
 * Copyright (c) 2026 the gearsim authors.
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gearsim/cost_model.hpp"
#include "gearsim/types.hpp"

namespace gearsim {

enum class Cluster : u8 { Big, Little };
enum class DeviceKind : u8 { Block, Console, Net, Custom };

struct PcpuConfig {
    PcpuId id = 0;
    Cluster cluster = Cluster::Big;
};

struct LlcConfig {
    u32 sets = 2048;     // power of two
    u32 ways = 16;
    u32 line_bytes = 64; // power of two
};

struct DeviceConfig {
    std::string name;
    Addr mmio_base = 0;
    u64 mmio_len = kPageSize;
    IrqLine irq_line = 0;
    DeviceKind behavior = DeviceKind::Custom;
    u64 stream_rate_hz = 0; // completion interrupts per second once armed
};

struct PlatformConfig {
    std::vector<PcpuConfig> pcpus;
    Addr ram_base = 0x4000'0000;
    u64 ram_pages = 4096;
    u32 gear1_reserved_pages = 16; // excluded from every stage-2 table
    Addr gicd_base = 0x0800'0000;
    u64 gicd_len = 0x1'0000;
    Addr gicc_base = 0x0801'0000;
    u64 gicc_len = 0x1'0000;
    u32 irq_lines = 256;
    u32 list_registers = 4;
    LlcConfig llc;
    std::vector<DeviceConfig> devices;
};

struct MemRegion {
    Addr start = 0;
    u64 len = 0;
};

struct VmManifest {
    VmId id = 0;
    VmKind kind = VmKind::Secondary;
    u32 vcpus = 1;
    std::vector<PcpuId> affinity;       // one pcpu per vcpu
    std::vector<MemRegion> mem_regions; // identity-mapped, page aligned
    std::vector<MemRegion> mmio_holes;  // unmapped on purpose, trap to emulate
    std::vector<std::string> passthrough; // device names owned outright
    u64 color_mask = ~0ull;             // allowed LLC colors
    u64 watchdog_period_ns = 0;         // 0 = unsupervised
    bool vgic_passthrough = true;       // RTVM: per-CPU GIC interface mapping
};

struct WorkloadAssign {
    VmId vm = 0;
    VcpuId vcpu = 0;
    std::vector<std::string> program; // one instruction per entry
};

enum class SupAction : u8 { LogOnly, RestartVm, RestartGear2, SocReset };

struct LayerConfig {
    u64 period_ns = 0;
    SupAction action = SupAction::LogOnly;
    bool enabled = true;
};

struct SupervisionConfig {
    bool enabled = false;
    LayerConfig l1{100'000'000};
    LayerConfig l2{250'000'000};
    LayerConfig l3{500'000'000};
    LayerConfig l4{1'000'000'000};
    u32 escalate_threshold = 3;       // repeated L2 failures
    u64 escalate_window_ns = 2'000'000'000;
};

struct SchedConfig {
    std::string policy = "round_robin";
    u64 quantum_ns = 1'000'000; // 1 ms default
};

struct ScenarioConfig {
    std::string name = "scenario";
    PlatformConfig platform;
    std::vector<VmManifest> vms;
    CostModel cost_model;
    std::vector<WorkloadAssign> workloads;
    SupervisionConfig supervision;
    SchedConfig sched;
    u64 seed = 0;
    u64 duration_ns = 1'000'000'000;
    u32 dvm_ring_depth = 64;
    u64 ring_retry_ns = 10'000;
    bool gdm_kernel_module = false; // drops the user-space hop cost
    std::string block_image;        // backing file path, empty = in-memory only
    SimTime gear2_stall_at = 0;     // 0 = never; induced primary-VM stall
    std::vector<VmId> stall_vms;    // VMs whose guests stop kicking/stepping
    SimTime vm_stall_at = 0;
};

/// Parse + validate a scenario file (JSON, schema in docs/scenario-schema.md).
/// Throws ConfigError with a precise message on any violation.
ScenarioConfig load_scenario(const std::string& path);
ScenarioConfig parse_scenario(const std::string& json_text);
void validate_scenario(const ScenarioConfig& cfg);

/// Find a device by name; nullptr when absent.
const DeviceConfig* find_device(const PlatformConfig& p, const std::string& name);

} // namespace gearsim
