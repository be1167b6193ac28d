/*
 * Copyright (c) 2026 the gearsim authors.
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <vector>

#include "gearsim/scenario.hpp"
#include "gearsim/types.hpp"

namespace gearsim {

class System;

struct Pcpu {
    PcpuId id = 0;
    Cluster cluster = Cluster::Big;
    bool on = false;
    bool in_guest = false;   // else the primary VM (Gear2) world
    bool chain_busy = false; // a hypervisor/guest chain is in flight
    VcpuRef guest{};
    u64 chain_gen = 0; // bumps invalidate in-flight guest continuations
};

struct LrEntry {
    IrqLine line = 0;
    u8 priority = 0;
};

/*
 * Per-vcpu virtual interface: a fixed set of list registers plus an
 * unbounded software overflow queue. Injected-but-undelivered interrupts
 * are always in one or the other; none are lost.
 */
struct GicCpuInterface {
    std::vector<std::optional<LrEntry>> lr;
    std::deque<IrqLine> overflow;
    u64 injected = 0;
    u64 delivered = 0;

    explicit GicCpuInterface(u32 lr_count = 4) : lr(lr_count) {}

    bool has_pending() const;
    u64 pending_count() const;
    int inject(IrqLine line); // returns LR slot or -1 for overflow
    std::optional<IrqLine> pop();
};

struct GicDistributor {
    std::vector<u8> enabled;
    std::vector<u8> pending;
    std::vector<std::optional<VcpuRef>> route;
    std::map<VmId, std::set<PcpuId>> sgi_filter; // allowed SGI target pcpus
    u64 sgi_filtered = 0;
    u64 illegal_writes = 0;
};

struct El1Timer {
    u64 cmp = 0;
    bool enabled = false;
    u64 gen = 0; // re-arm generation, invalidates stale fire events
};

struct El2Timer {
    u64 cmp = 0;
    bool enabled = false;
    VcpuRef target{};
    u64 gen = 0;
};

enum class LlcOutcome : u8 { Hit, MissCold, MissSelf, MissCross };

/*
 * Set-associative LLC with per-set LRU. The color index is the part of the
 * PA set index above the page offset; a miss is classified by what it had
 * to evict (nothing = cold, own line = self conflict, foreign = cross).
 */
class LlcModel {
public:
    void configure(const LlcConfig& geo);

    LlcOutcome access(VmId vm, Addr pa);
    u32 color_of(Addr pa) const;
    u32 colors() const { return colors_; }
    const LlcConfig& geometry() const { return geo_; }

    struct Stats {
        u64 hits = 0;
        u64 cold = 0;
        u64 self_conflict = 0;
        u64 cross_conflict = 0;
    };
    const Stats& stats() const { return stats_; }

    /// When enabled, every access is appended here (tests feed it to the
    /// brute-force oracle).
    bool log_accesses = false;
    std::vector<std::pair<VmId, Addr>> access_log;

    u64 set_occupancy(u32 set) const { return sets_[set].size(); }

private:
    struct Entry {
        VmId vm;
        u64 tag;
        u64 lru;
    };
    LlcConfig geo_;
    u32 colors_ = 1;
    u32 set_shift_ = 6;
    u64 lru_clock_ = 0;
    std::vector<std::vector<Entry>> sets_;
    Stats stats_;
};

struct DeviceState {
    DeviceConfig cfg;
    u32 index = 0;
    bool streaming = false;
    u64 stream_gen = 0;
    u64 raised = 0; // completion interrupts raised so far
};

enum class AccessOutcome : u8 { Ok, FaultMmio, FaultPerm };

struct AccessResult {
    AccessOutcome kind = AccessOutcome::Ok;
    Addr pa = 0;
    u64 value = 0;
    LlcOutcome llc = LlcOutcome::Hit;
};

enum class IrqOutcome : u8 { DirectPrimary, DirectRtvm, Trapped, ForwardedIdle, Pending };

/*
 * The simulated SoC: pcpus, physical memory, GIC distributor + per-vcpu
 * interfaces, timers against the shared system count (== virtual time),
 * the LLC model and MMIO device stubs.
 */
class Machine {
public:
    void attach(System& sys) { sys_ = &sys; }
    void configure(const PlatformConfig& cfg);

    // --- topology ---
    Pcpu& pcpu(PcpuId p) { return pcpus_.at(p); }
    const Pcpu& pcpu(PcpuId p) const { return pcpus_.at(p); }
    u32 pcpu_count() const { return static_cast<u32>(pcpus_.size()); }

    GicDistributor& gicd() { return gicd_; }
    GicCpuInterface& gicc(VcpuRef v);
    void add_vcpu(VcpuRef v);

    // --- interrupts (external interrupt delivery flow) ---
    IrqOutcome raise_irq(IrqLine line); // throws if line unconfigured
    void flush_pending(IrqLine line);   // re-deliver after enable

    // --- memory ---
    AccessResult mem_access(VcpuRef world, Addr ipa, bool write, u32 size, u64 value);
    u64 ram_read(Addr pa, u32 size) const;
    void ram_write(Addr pa, u32 size, u64 value);
    LlcModel& llc() { return llc_; }
    const LlcModel& llc() const { return llc_; }

    // --- timers ---
    El1Timer& el1_timer(VcpuRef v) { return el1_.at(v); }
    void arm_el1(VcpuRef v, u64 cmp);
    void disarm_el1(VcpuRef v);
    void arm_el2(PcpuId p, u64 cmp, VcpuRef target);
    void disarm_el2(PcpuId p);
    const El2Timer& el2_timer(PcpuId p) const { return el2_.at(p); }

    // --- devices ---
    DeviceState* device_at(Addr pa);
    DeviceState* device_by_name(const std::string& name);
    DeviceState* device_by_index(u32 idx);
    void device_mmio(DeviceState& dev, Addr offset, bool write, u64 value, u64* out);
    void stop_streams();

    bool is_gic_range(Addr a) const;
    bool is_gicd(Addr a) const { return a >= cfg_.gicd_base && a < cfg_.gicd_base + cfg_.gicd_len; }
    bool is_gicc(Addr a) const { return a >= cfg_.gicc_base && a < cfg_.gicc_base + cfg_.gicc_len; }

    const PlatformConfig& config() const { return cfg_; }

    // per-line raise counters (interrupt frequency measurements)
    u64 irqs_raised() const { return irqs_raised_; }
    u64 timer_virqs() const { return timer_virqs_; }
    void count_timer_virq() { ++timer_virqs_; }

private:
    void el1_fire(VcpuRef v, u64 gen);
    void el2_fire(PcpuId p, u64 gen);
    void stream_tick(u32 dev_index, u64 gen, u64 period);

    System* sys_ = nullptr;
    PlatformConfig cfg_;
    std::vector<Pcpu> pcpus_;
    GicDistributor gicd_;
    std::map<VcpuRef, GicCpuInterface> gicc_;
    std::map<VcpuRef, El1Timer> el1_;
    std::map<PcpuId, El2Timer> el2_;
    LlcModel llc_;
    std::vector<DeviceState> devices_;
    std::map<u64, std::unique_ptr<std::vector<u8>>> ram_; // sparse, per page
    u64 irqs_raised_ = 0;
    u64 timer_virqs_ = 0;
};

} // namespace gearsim
