/*
 * Copyright (c) 2026 the gearsim authors.
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <array>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "gearsim/scenario.hpp"
#include "gearsim/trace.hpp"
#include "gearsim/types.hpp"

namespace gearsim {

class System;

// virtual interrupt line map (docs/hypercall-abi.md)
constexpr IrqLine kTimerVirqLine = 27; // per-vcpu EL1 virtual timer
constexpr IrqLine kTickLine = 30;      // primary-owned scheduler tick
constexpr IrqLine kVirtioKickBase = 64;  // + device index, toward the DVM
constexpr IrqLine kVirtioComplBase = 96; // + device index, toward the source VM
constexpr IrqLine kIvcNotifyLine = 160;

// emulated distributor register windows (offsets into the GICD page)
constexpr Addr kGicdCtlr = 0x000;
constexpr Addr kGicdIsEnabler = 0x100; // 32 lines per 4-byte word
constexpr Addr kGicdIcEnabler = 0x180;
constexpr Addr kGicdSgir = 0xF00;
constexpr Addr kGicdRouter = 0x6000; // 8 bytes per line, value = vm<<16 | vcpu

enum class Ownership : u8 { Owned, Lent, SharedFrom };

struct PageEntry {
    Addr pa = 0; // identity: pa == ipa for every mapped page
    bool read = true;
    bool write = true;
    Ownership own = Ownership::Owned;
    VmId peer = 0; // borrower for Lent, owner for SharedFrom
};

/// Per-VM IPA->PA map. MMIO-hole IPAs are absent on purpose so access traps.
struct Stage2Table {
    std::map<u64, PageEntry> pages; // keyed by ipa page number
};

enum class RunState : u8 { Ready, Running, Blocked, Off };
enum class BlockReason : u8 { None, Wfi, Mmio, Fault, Done };

struct SysRegs {
    u64 el1_timer_cmp = 0;
    u64 el1_timer_enabled = 0;
    u64 irq_masked = 0;
    u64 program_point = 0; // guest workload instruction index
    friend bool operator==(const SysRegs&, const SysRegs&) = default;
};

/*
 * Saved execution world. Pending virtual interrupts live in the machine's
 * per-vcpu interface; save/restore of this struct is the identity.
 */
struct VcpuContext {
    std::array<u64, 31> gpr{};
    SysRegs sys;
    RunState run = RunState::Off;
    BlockReason block = BlockReason::None;
    friend bool operator==(const VcpuContext& a, const VcpuContext& b) {
        return a.gpr == b.gpr && a.sys == b.sys;
    }
};

struct ExitReason {
    enum Kind : u8 {
        Hypercall,
        MmioRead,
        MmioWrite,
        Wfi,
        GicdAccess,
        PhysIrq,
        Stage2Perm,
        Yield,
    };
    Kind kind = Yield;
    u64 a = 0; // addr | hypercall id | line
    u64 b = 0; // size | arg0
    u64 c = 0; // value | arg1
    u64 d = 0; // arg2 | end-of-program flag for Yield
    bool blocking = true; // MMIO semantics
};

enum class HypercallId : u32 {
    RunVcpu = 1,
    VirqInject = 2,
    IvcSend = 3,
    PsciCpuOn = 4,
    MemShare = 5,
    MemReclaim = 6,
    WatchdogKick = 7,
};

// Hypercall result codes (published ABI, docs/hypercall-abi.md)
constexpr i64 HC_OK = 0;
constexpr i64 HC_EUNKNOWN = -1;
constexpr i64 HC_EINVAL = -2;
constexpr i64 HC_EDENIED = -3;
constexpr i64 HC_EAGAIN = -4;
constexpr i64 HC_ENOTOWNER = -5;
constexpr i64 HC_ENOTLENT = -6;
constexpr i64 HC_EALREADYON = -7;
constexpr i64 HC_ENOPCPU = -8;
constexpr i64 HC_ENOTARGET = -9;

struct TranslateResult {
    enum Kind : u8 { Ok, FaultMmio, FaultPerm } kind = Ok;
    Addr pa = 0;
};

/// Simulated FDT: the boot-time description each guest receives.
struct BootInfoRecord {
    std::vector<MemRegion> mem;
    std::vector<PcpuId> pcpus;
    std::vector<std::string> devices;
};

struct IvcRing {
    std::deque<u64> messages; // payload lengths; content is not modeled
    u32 depth = 16;
};

/*
 * The partitioning-mechanism hypervisor. One-time init builds the identity
 * stage-2 tables from manifests; at runtime it owns world switches, trap
 * routing (GIC and EL2 timer handled here, the rest forwarded to Gear2),
 * the hypercall ABI and page ownership.
 */
class Gear1 {
public:
    void attach(System& sys) { sys_ = &sys; }

    /// Validates manifests, builds stage-2 tables and boot-info records,
    /// reserves gear1-private pages, then transfers control to the primary
    /// VM entry on pcpu 0. Throws ConfigError on any manifest violation.
    void init(const PlatformConfig& platform, const std::vector<VmManifest>& manifests);

    TranslateResult translate(VmId vm, Addr ipa) const;

    const VmManifest* manifest(VmId vm) const;
    const std::vector<VmManifest>& manifests() const { return manifests_; }
    VmId primary_vm() const { return primary_vm_; }
    std::optional<VmId> dvm() const { return dvm_; }
    std::optional<VmId> rtvm_on(PcpuId p) const;
    std::optional<VmId> device_owner(u32 dev_index) const;

    VcpuContext& context(VcpuRef v) { return contexts_.at(v); }
    const std::map<VcpuRef, VcpuContext>& contexts() const { return contexts_; }
    const Stage2Table& table(VmId vm) const { return tables_.at(vm); }
    const BootInfoRecord& boot_info(VmId vm) const { return boot_infos_.at(vm); }

    /// Explicit world save/restore (round trip is the identity).
    VcpuContext save_context(VcpuRef v) const { return contexts_.at(v); }
    void restore_context(VcpuRef v, const VcpuContext& ctx) { contexts_.at(v) = ctx; }

    // --- execution chains (called from engine events) ---

    /// RunVcpu on behalf of Gear2: hypercall entry plus world switch into
    /// the target; the guest chain takes over afterwards.
    void run_vcpu(PcpuId p, VcpuRef v, Cause cause);

    /// Initial entry of an RTVM vcpu on its dedicated pcpu.
    void launch_rtvm(PcpuId p, VcpuRef v);

    /// Implicit trap from the current guest world on p. Charges the trap
    /// entry, then either handles in place (GIC emulation, contained RTVM
    /// faults) or routes to Gear2 with exactly one world switch.
    void guest_trap(PcpuId p, ExitReason reason);

    /// Explicit HVC from the guest on p.
    void guest_hypercall(PcpuId p, u32 id, u64 a0, u64 a1, u64 a2);

    // --- gear1 services ---
    i64 psci_cpu_on(VmId caller, PcpuId target);

    /// Places the line in the target's list register or overflow queue and
    /// wakes a WFI-blocked target. The wake reaction is scheduled at
    /// now + effect_delay + inject cost so callers can chain charges.
    i64 virq_inject(VcpuRef target, IrqLine line, bool charge = true, SimTime effect_delay = 0);

    i64 mem_share(VmId owner, Addr ipa_start, u64 pages, VmId target);
    i64 mem_reclaim(VmId owner, Addr ipa_start, u64 pages);

    /// Trap-and-emulate for the distributor (and trapped per-CPU interface)
    /// window. Returns extra chained cost beyond gicd_emul_ns (injections).
    u64 emulate_gicd(VcpuRef caller, Addr addr, bool write, u64 value, u64* out,
                     SimTime base_delay);

    void el2_multiplex_update(PcpuId p);
    void on_el1_timer_fire(VcpuRef v);
    void on_el2_timer_fire(PcpuId p, VcpuRef target);
    void restart_vm(VmId vm);

    /// Colored page allocator: picks `pages` pages whose color is allowed
    /// by mask, scanning from base, returning page-granular regions.
    static std::vector<MemRegion> allocate_colored(Addr base, u64 pool_pages, u64 pages,
                                                   u64 color_mask, u32 colors);

    // --- audit counters ---
    u64 vm_exits(VmId vm) const;
    u64 gear2_hops(VmId vm) const;
    u64 gicd_traps(VmId vm) const;
    u64 world_switches() const { return world_switches_; }
    const std::set<u64>& gear1_pages() const { return gear1_pages_; }
    const std::map<u64, VmId>& owner_index() const { return owner_; }
    const std::set<IrqLine>& owned_lines(VmId vm) const;

    bool vm_exists(VmId vm) const { return vm_index_.count(vm) != 0; }
    bool vcpu_exists(VcpuRef v) const { return contexts_.count(v) != 0; }

private:
    void build_table(const VmManifest& m);
    void world_switch_record(PcpuId p, VcpuRef to, Cause cause);
    void enter_guest(PcpuId p, VcpuRef v, Cause cause);
    void route_to_gear2(PcpuId p, VcpuRef v, ExitReason reason, Cause cause);
    i64 ivc_send(VmId src, VmId dst, u64 len, SimTime effect_delay);
    std::optional<VcpuRef> vcpu_on_pcpu(VmId vm, PcpuId p) const;
    bool in_ram(Addr pa) const;

    System* sys_ = nullptr;
    PlatformConfig platform_;
    std::vector<VmManifest> manifests_;
    std::map<VmId, size_t> vm_index_;
    VmId primary_vm_ = 0;
    std::optional<VmId> dvm_;
    std::map<VmId, Stage2Table> tables_;
    std::map<VcpuRef, VcpuContext> contexts_;
    std::map<VmId, BootInfoRecord> boot_infos_;
    std::map<u64, VmId> owner_; // RAM pa page -> owning vm (single record)
    std::set<u64> gear1_pages_;
    std::map<std::pair<VmId, VmId>, IvcRing> ivc_;
    std::map<VmId, std::set<IrqLine>> owned_lines_;
    std::map<u32, VmId> device_owner_; // device index -> passthrough owner

    std::map<VmId, u64> exits_;
    std::map<VmId, u64> hops_;
    std::map<VmId, u64> gicd_traps_count_;
    u64 world_switches_ = 0;
};

} // namespace gearsim
