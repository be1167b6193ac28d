/*
 * Copyright (c) 2026 the gearsim authors.
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include "gearsim/types.hpp"

namespace gearsim {

/*
 * Named nanosecond costs of hypervisor transitions. The first three are the
 * measured primitives (docs/cost-model.md); virq_inject/gicd_emul/gdm_user_hop
 * are fitted so the composed IPI and I/O-out paths land on their targets —
 * `bench calibrate` re-derives them from scratch.
 */
struct CostModel {
    u64 hypercall_ns = 441;      // HVC round trip resolved inside gear1
    u64 vm_trap_ns = 732;        // implicit trap entry (MMIO/WFI/GICD/IRQ)
    u64 world_switch_ns = 1485;  // full context save/restore + stage-2 root
    u64 virq_inject_ns = 600;    // list-register update (fitting convention)
    u64 gicd_emul_ns = 6670;     // distributor/cpu-interface emulation (fitted)
    u64 el3_hop_ns = 1000;       // firmware call for PSCI power control
    u64 gdm_user_hop_ns = 3149;  // kernel->user handoff inside the DVM (fitted)
    u64 per_byte_copy_ns = 1;    // copy-mode IVC payload cost

    // guest-side bookkeeping, not hypervisor transitions
    u64 guest_op_ns = 10; // non-Compute instruction issue cost
    u64 mem_touch_ns = 2; // per touched line in MemTouch
};

} // namespace gearsim
