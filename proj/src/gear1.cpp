/*
 * Copyright (c) 2026 the gearsim authors.
 * SPDX-License-Identifier: Apache-2.0
 */
#include "gearsim/gear1.hpp"

#include <algorithm>
#include <stdexcept>

#include "gearsim/system.hpp"

namespace gearsim {

namespace {

bool regions_overlap(const MemRegion& a, const MemRegion& b) {
    return a.start < b.start + b.len && b.start < a.start + a.len;
}

bool within(Addr a, const MemRegion& r) {
    return a >= r.start && a < r.start + r.len;
}

} // namespace

// ------------------------------------------------------------------- init

void Gear1::init(const PlatformConfig& platform, const std::vector<VmManifest>& manifests) {
    platform_ = platform;
    manifests_ = manifests;
    vm_index_.clear();
    tables_.clear();
    contexts_.clear();
    boot_infos_.clear();
    owner_.clear();
    gear1_pages_.clear();
    owned_lines_.clear();
    device_owner_.clear();
    dvm_.reset();

    u32 pcpu_count = static_cast<u32>(platform.pcpus.size());
    if (pcpu_count == 0)
        throw ConfigError(ConfigErrc::Schema, "platform has no pcpus");

    const Addr ram_end = platform.ram_base + platform.ram_pages * kPageSize;
    u32 colors = 1;
    {
        u64 span = static_cast<u64>(platform.llc.sets) * platform.llc.line_bytes;
        colors = span > kPageSize ? static_cast<u32>(span / kPageSize) : 1;
    }

    int primaries = 0, dvms = 0;
    for (size_t i = 0; i < manifests_.size(); ++i) {
        const VmManifest& m = manifests_[i];
        if (vm_index_.count(m.id))
            throw ConfigError(ConfigErrc::Schema, "duplicate vm id");
        vm_index_[m.id] = i;
        if (m.kind == VmKind::Primary) {
            ++primaries;
            primary_vm_ = m.id;
        }
        if (m.kind == VmKind::Dvm) {
            ++dvms;
            dvm_ = m.id;
        }
        if (m.vcpus == 0)
            throw ConfigError(ConfigErrc::Schema, "vm has no vcpus");
        if (m.affinity.size() != m.vcpus)
            throw ConfigError(ConfigErrc::Schema, "affinity list does not match vcpu count");
        for (PcpuId p : m.affinity)
            if (p >= pcpu_count)
                throw ConfigError(ConfigErrc::UnknownRef, "affinity references unknown pcpu");
        for (const MemRegion& r : m.mem_regions) {
            if (!page_aligned(r.start) || !page_aligned(r.len) || r.len == 0)
                throw ConfigError(ConfigErrc::ManifestUnaligned, "memory region not page aligned");
            if (r.start < platform.ram_base || r.start + r.len > ram_end)
                throw ConfigError(ConfigErrc::ManifestOverlap, "memory region outside RAM");
            for (u64 pg = page_of(r.start); pg < page_of(r.start + r.len); ++pg) {
                u32 c = static_cast<u32>(pg & (colors - 1));
                if (!(m.color_mask & (1ull << c)))
                    throw ConfigError(ConfigErrc::ColorMask, "region page outside color mask");
            }
            for (const MemRegion& h : m.mmio_holes)
                if (regions_overlap(r, h))
                    throw ConfigError(ConfigErrc::ManifestOverlap,
                                      "mmio hole intersects a mapped region");
        }
        for (const MemRegion& h : m.mmio_holes)
            if (!page_aligned(h.start) || !page_aligned(h.len))
                throw ConfigError(ConfigErrc::ManifestUnaligned, "mmio hole not page aligned");
        for (const std::string& dev : m.passthrough)
            if (!find_device(platform, dev))
                throw ConfigError(ConfigErrc::UnknownRef, "passthrough device '" + dev + "' unknown");
    }
    if (primaries != 1)
        throw ConfigError(ConfigErrc::Schema, "exactly one primary vm required");
    if (dvms > 1)
        throw ConfigError(ConfigErrc::Schema, "at most one device-model vm");

    // gear1-private pages come first and belong to no table
    for (u32 i = 0; i < platform.gear1_reserved_pages; ++i)
        gear1_pages_.insert(page_of(platform.ram_base) + i);

    // PA exclusivity across manifests and against gear1's reservation
    for (size_t i = 0; i < manifests_.size(); ++i) {
        for (const MemRegion& r : manifests_[i].mem_regions) {
            for (u64 pg = page_of(r.start); pg < page_of(r.start + r.len); ++pg)
                if (gear1_pages_.count(pg))
                    throw ConfigError(ConfigErrc::ManifestOverlap,
                                      "region overlaps gear1-private pages");
            for (size_t j = i + 1; j < manifests_.size(); ++j)
                for (const MemRegion& o : manifests_[j].mem_regions)
                    if (regions_overlap(r, o))
                        throw ConfigError(ConfigErrc::ManifestOverlap,
                                          "memory regions of two VMs intersect");
        }
    }

    // RTVM pcpus are used by no other VM
    for (const VmManifest& m : manifests_) {
        if (m.kind != VmKind::Rtvm)
            continue;
        std::set<PcpuId> mine(m.affinity.begin(), m.affinity.end());
        for (const VmManifest& o : manifests_) {
            if (o.id == m.id)
                continue;
            for (PcpuId p : o.affinity)
                if (mine.count(p))
                    throw ConfigError(ConfigErrc::RtvmAffinityShared,
                                      "rtvm shares a pcpu with another vm");
        }
    }

    // device passthrough ownership (exclusive)
    for (const VmManifest& m : manifests_) {
        for (const std::string& name : m.passthrough) {
            DeviceState* d = sys_->machine.device_by_name(name);
            if (!d)
                throw ConfigError(ConfigErrc::UnknownRef, "device '" + name + "' unknown");
            if (device_owner_.count(d->index))
                throw ConfigError(ConfigErrc::ManifestOverlap,
                                  "device '" + name + "' passed through twice");
            device_owner_[d->index] = m.id;
            owned_lines_[m.id].insert(d->cfg.irq_line);
        }
    }

    for (const VmManifest& m : manifests_) {
        build_table(m);
        for (u32 c = 0; c < m.vcpus; ++c) {
            VcpuRef v{m.id, c};
            contexts_[v] = VcpuContext{};
            sys_->machine.add_vcpu(v);
        }
        // interrupt routing + sgi containment defaults
        auto& gd = sys_->machine.gicd();
        std::set<PcpuId> affine(m.affinity.begin(), m.affinity.end());
        if (m.kind == VmKind::Primary)
            for (u32 p = 0; p < pcpu_count; ++p)
                affine.insert(p);
        gd.sgi_filter[m.id] = affine;

        BootInfoRecord bi;
        bi.mem = m.mem_regions;
        bi.pcpus = m.affinity;
        bi.devices = m.passthrough;
        boot_infos_[m.id] = bi;
        sys_->record(Actor::gear1(), Action::BootInfo, 0,
                     {m.id, static_cast<i64>(bi.mem.size()), static_cast<i64>(bi.pcpus.size()),
                      static_cast<i64>(bi.devices.size())});
    }

    // low-level interrupt routing: device lines point at their owner, or at
    // the DVM for virtio-served devices
    auto& gd = sys_->machine.gicd();
    for (u32 i = 0;; ++i) {
        DeviceState* d = sys_->machine.device_by_index(i);
        if (!d)
            break;
        std::optional<VmId> owner;
        if (auto it = device_owner_.find(i); it != device_owner_.end())
            owner = it->second;
        else if (dvm_)
            owner = *dvm_;
        if (owner) {
            gd.route[d->cfg.irq_line] = VcpuRef{*owner, 0};
            gd.enabled[d->cfg.irq_line] = 1;
        }
    }

    // control transfers to the primary VM entry on pcpu 0
    Pcpu& p0 = sys_->machine.pcpu(0);
    p0.on = true;
    p0.in_guest = false;
    p0.chain_busy = false;
}

void Gear1::build_table(const VmManifest& m) {
    Stage2Table& t = tables_[m.id];
    for (const MemRegion& r : m.mem_regions) {
        for (u64 pg = page_of(r.start); pg < page_of(r.start + r.len); ++pg) {
            if (owner_.count(pg))
                throw ConfigError(ConfigErrc::ManifestOverlap, "page owned twice");
            owner_[pg] = m.id;
            t.pages[pg] = PageEntry{page_addr(pg), true, true, Ownership::Owned, 0};
        }
    }
    // pass-through device windows map identity (no ownership tracking:
    // exclusivity is enforced at the device level)
    for (const std::string& name : m.passthrough) {
        const DeviceConfig* d = find_device(platform_, name);
        for (u64 pg = page_of(d->mmio_base); pg < page_of(d->mmio_base + d->mmio_len + kPageSize - 1);
             ++pg)
            t.pages[pg] = PageEntry{page_addr(pg), true, true, Ownership::Owned, 0};
    }
    // hardware vGIC: the per-CPU interface is mapped unless the manifest
    // asks for full emulation
    if (m.vgic_passthrough && m.kind != VmKind::Primary) {
        for (u64 pg = page_of(platform_.gicc_base);
             pg < page_of(platform_.gicc_base + platform_.gicc_len + kPageSize - 1); ++pg)
            t.pages[pg] = PageEntry{page_addr(pg), true, true, Ownership::Owned, 0};
    }
}

bool Gear1::in_ram(Addr pa) const {
    return pa >= platform_.ram_base && pa < platform_.ram_base + platform_.ram_pages * kPageSize;
}

const VmManifest* Gear1::manifest(VmId vm) const {
    auto it = vm_index_.find(vm);
    return it == vm_index_.end() ? nullptr : &manifests_[it->second];
}

std::optional<VmId> Gear1::rtvm_on(PcpuId p) const {
    for (const VmManifest& m : manifests_)
        if (m.kind == VmKind::Rtvm)
            for (PcpuId a : m.affinity)
                if (a == p)
                    return m.id;
    return std::nullopt;
}

std::optional<VmId> Gear1::device_owner(u32 dev_index) const {
    auto it = device_owner_.find(dev_index);
    if (it == device_owner_.end())
        return std::nullopt;
    return it->second;
}

const std::set<IrqLine>& Gear1::owned_lines(VmId vm) const {
    static const std::set<IrqLine> empty;
    auto it = owned_lines_.find(vm);
    return it == owned_lines_.end() ? empty : it->second;
}

std::optional<VcpuRef> Gear1::vcpu_on_pcpu(VmId vm, PcpuId p) const {
    const VmManifest* m = manifest(vm);
    if (!m)
        return std::nullopt;
    for (u32 c = 0; c < m->vcpus; ++c)
        if (m->affinity[c] == p)
            return VcpuRef{vm, c};
    return std::nullopt;
}

// -------------------------------------------------------------- translate

TranslateResult Gear1::translate(VmId vm, Addr ipa) const {
    auto ti = tables_.find(vm);
    if (ti == tables_.end())
        throw std::invalid_argument("translate: unknown vm");
    auto it = ti->second.pages.find(page_of(ipa));
    if (it != ti->second.pages.end())
        return {TranslateResult::Ok, it->second.pa | (ipa & (kPageSize - 1))};
    // unmapped on purpose? GIC windows always trap when not mapped
    if (ipa >= platform_.gicd_base && ipa < platform_.gicd_base + platform_.gicd_len)
        return {TranslateResult::FaultMmio, 0};
    if (ipa >= platform_.gicc_base && ipa < platform_.gicc_base + platform_.gicc_len)
        return {TranslateResult::FaultMmio, 0};
    const VmManifest* m = manifest(vm);
    for (const MemRegion& h : m->mmio_holes)
        if (within(ipa, h))
            return {TranslateResult::FaultMmio, 0};
    return {TranslateResult::FaultPerm, 0};
}

// ---------------------------------------------------------------- chains

void Gear1::world_switch_record(PcpuId p, VcpuRef to, Cause cause) {
    ++world_switches_;
    Pcpu& pc = sys_->machine.pcpu(p);
    i64 from_vm = pc.in_guest ? static_cast<i64>(pc.guest.vm) : static_cast<i64>(primary_vm_);
    sys_->record(Actor::gear1(), Action::WorldSwitch, sys_->costs.world_switch_ns,
                 {static_cast<i64>(p), from_vm, to.vm, to.vcpu}, cause);
}

void Gear1::run_vcpu(PcpuId p, VcpuRef v, Cause cause) {
    const CostModel& cm = sys_->costs;
    sys_->record(Actor::gear2(), Action::Hypercall, cm.hypercall_ns,
                 {v.vm, v.vcpu, static_cast<i64>(HypercallId::RunVcpu), 0}, cause);
    world_switch_record(p, v, cause);
    Pcpu& pc = sys_->machine.pcpu(p);
    pc.chain_busy = true;
    u64 gen = ++pc.chain_gen;
    sys_->engine.schedule_in(cm.hypercall_ns + cm.world_switch_ns, EventKind::GuestStep,
                             [this, p, v, cause, gen] {
                                 if (sys_->machine.pcpu(p).chain_gen != gen)
                                     return;
                                 enter_guest(p, v, cause);
                             });
}

void Gear1::launch_rtvm(PcpuId p, VcpuRef v) {
    sys_->record(Actor::gear1(), Action::RtvmLaunch, 0,
                 {v.vm, v.vcpu, static_cast<i64>(p)});
    world_switch_record(p, v, Cause::Boot);
    Pcpu& pc = sys_->machine.pcpu(p);
    pc.chain_busy = true;
    u64 gen = ++pc.chain_gen;
    sys_->engine.schedule_in(sys_->costs.world_switch_ns, EventKind::GuestStep,
                             [this, p, v, gen] {
                                 if (sys_->machine.pcpu(p).chain_gen != gen)
                                     return;
                                 enter_guest(p, v, Cause::Boot);
                             });
}

void Gear1::enter_guest(PcpuId p, VcpuRef v, Cause cause) {
    (void)cause;
    Pcpu& pc = sys_->machine.pcpu(p);
    pc.in_guest = true;
    pc.guest = v;
    pc.chain_busy = true;
    VcpuContext& ctx = contexts_.at(v);
    ctx.run = RunState::Running;
    ctx.block = BlockReason::None;

    sys_->gear2.on_guest_entered(p, v);

    // hand the EL1 timer back to the direct path
    El1Timer& t = sys_->machine.el1_timer(v);
    if (t.enabled) {
        if (t.cmp > sys_->now()) {
            sys_->machine.arm_el1(v, t.cmp);
        } else {
            // deadline passed in transit: pending virq on resume
            t.enabled = false;
            virq_inject(v, kTimerVirqLine, false);
        }
    }
    el2_multiplex_update(p);
    sys_->guest_continue(p, 0);
}

void Gear1::guest_trap(PcpuId p, ExitReason reason) {
    Pcpu& pc = sys_->machine.pcpu(p);
    VcpuRef v = pc.guest;
    ++pc.chain_gen;
    pc.chain_busy = true;
    ++exits_[v.vm];
    const CostModel& cm = sys_->costs;
    VcpuContext& ctx = contexts_.at(v);
    const VmManifest* m = manifest(v.vm);

    sys_->record(Actor::gear1(), Action::VmTrap, cm.vm_trap_ns,
                 {v.vm, v.vcpu, reason.kind, static_cast<i64>(p)});

    switch (reason.kind) {
    case ExitReason::GicdAccess: {
        ++gicd_traps_count_[v.vm];
        u64 dt = cm.vm_trap_ns;
        sys_->record(Actor::gear1(), Action::GicdEmul, cm.gicd_emul_ns,
                     {v.vm, static_cast<i64>(reason.a), reason.blocking ? 1 : 0});
        u64 out = 0;
        u64 extra = emulate_gicd(v, reason.a, /*write=*/reason.blocking, reason.c, &out,
                                 dt + cm.gicd_emul_ns);
        dt += cm.gicd_emul_ns + extra;
        ctx.gpr[0] = out;
        ctx.sys.program_point += 1; // the trapped access completes
        sys_->guest_continue(p, dt);
        return;
    }
    case ExitReason::MmioRead:
    case ExitReason::MmioWrite:
        if (m->kind == VmKind::Rtvm) {
            // contained: RTVM never reaches Gear2; fault is logged and the
            // access skipped
            sys_->record(Actor::guest(v), Action::GuestFault, 0,
                         {v.vm, v.vcpu, static_cast<i64>(reason.a), 1});
            ctx.sys.program_point += 1;
            sys_->guest_continue(p, cm.vm_trap_ns);
            return;
        }
        route_to_gear2(p, v, reason, Cause::Io);
        return;
    case ExitReason::Stage2Perm:
        if (m->kind == VmKind::Rtvm) {
            sys_->record(Actor::guest(v), Action::GuestFault, 0,
                         {v.vm, v.vcpu, static_cast<i64>(reason.a), 2});
            ctx.sys.program_point += 1;
            sys_->guest_continue(p, cm.vm_trap_ns);
            return;
        }
        route_to_gear2(p, v, reason, Cause::None);
        return;
    case ExitReason::Wfi:
        route_to_gear2(p, v, reason, Cause::IrqFwd);
        return;
    case ExitReason::PhysIrq:
        route_to_gear2(p, v, reason,
                       reason.a == kTickLine ? Cause::Sched : Cause::IrqFwd);
        return;
    case ExitReason::Yield:
        route_to_gear2(p, v, reason, Cause::Sched);
        return;
    case ExitReason::Hypercall:
        break; // explicit HVCs use guest_hypercall
    }
}

void Gear1::route_to_gear2(PcpuId p, VcpuRef v, ExitReason reason, Cause cause) {
    ++hops_[v.vm];
    const CostModel& cm = sys_->costs;
    sys_->record(Actor::gear1(), Action::RouteToGear2, 0, {v.vm, v.vcpu, reason.kind});
    world_switch_record(p, v, cause);

    Pcpu& pc = sys_->machine.pcpu(p);
    pc.in_guest = false;
    VcpuContext& ctx = contexts_.at(v);
    if (ctx.run == RunState::Running)
        ctx.run = RunState::Ready;

    // timer handover: direct EL1 fire is absorbed by the EL2 multiplexer
    El1Timer& t = sys_->machine.el1_timer(v);
    if (t.enabled)
        ++t.gen;
    el2_multiplex_update(p);

    u64 gen = ++pc.chain_gen;
    sys_->engine.schedule_in(cm.vm_trap_ns + cm.world_switch_ns, EventKind::Custom,
                             [this, p, v, reason, gen] {
                                 if (sys_->machine.pcpu(p).chain_gen != gen)
                                     return;
                                 sys_->gear2.on_vm_exit(p, VmExitMessage{v, reason});
                             });
}

// ------------------------------------------------------------- hypercalls

void Gear1::guest_hypercall(PcpuId p, u32 id, u64 a0, u64 a1, u64 a2) {
    Pcpu& pc = sys_->machine.pcpu(p);
    VcpuRef v = pc.guest;
    ++pc.chain_gen;
    pc.chain_busy = true;
    ++exits_[v.vm];
    const CostModel& cm = sys_->costs;
    u64 dt = cm.hypercall_ns;
    u64 extra = 0;
    i64 rc = HC_EUNKNOWN;

    switch (static_cast<HypercallId>(id)) {
    case HypercallId::RunVcpu:
    case HypercallId::PsciCpuOn:
        rc = HC_EDENIED; // gear2-only entry points
        break;
    case HypercallId::VirqInject:
        rc = virq_inject(VcpuRef{static_cast<VmId>(a0), static_cast<VcpuId>(a1)},
                         static_cast<IrqLine>(a2), true, dt);
        if (rc == HC_OK)
            extra += cm.virq_inject_ns;
        break;
    case HypercallId::IvcSend:
        rc = ivc_send(v.vm, static_cast<VmId>(a0), a1, dt);
        if (rc == HC_OK)
            extra += cm.virq_inject_ns;
        break;
    case HypercallId::MemShare:
        rc = mem_share(v.vm, a0, a1, static_cast<VmId>(a2));
        break;
    case HypercallId::MemReclaim:
        rc = mem_reclaim(v.vm, a0, a1);
        break;
    case HypercallId::WatchdogKick:
        rc = sys_->supervision.kick(Layer::L2RS, "vm:" + std::to_string(v.vm))
                 ? HC_OK
                 : HC_ENOTARGET;
        break;
    default:
        rc = HC_EUNKNOWN;
        break;
    }

    sys_->record(Actor::guest(v), Action::Hypercall, cm.hypercall_ns,
                 {v.vm, v.vcpu, id, rc});
    VcpuContext& ctx = contexts_.at(v);
    ctx.gpr[0] = static_cast<u64>(rc);
    ctx.sys.program_point += 1;
    sys_->guest_continue(p, dt + extra);
}

i64 Gear1::psci_cpu_on(VmId caller, PcpuId target) {
    if (caller != primary_vm_)
        return HC_EDENIED;
    if (target >= sys_->machine.pcpu_count())
        return HC_ENOPCPU;
    Pcpu& pc = sys_->machine.pcpu(target);
    if (pc.on) {
        sys_->record(Actor::gear1(), Action::PsciOn, 0,
                     {static_cast<i64>(target), HC_EALREADYON});
        return HC_EALREADYON;
    }
    // gear1 forwards the power-on to the EL3 firmware
    sys_->record(Actor::gear1(), Action::El3Hop, sys_->costs.el3_hop_ns,
                 {static_cast<i64>(target)});
    sys_->record(Actor::gear1(), Action::PsciOn, 0, {static_cast<i64>(target), HC_OK});
    pc.on = true;
    pc.in_guest = false;
    pc.chain_busy = false;
    return HC_OK;
}

i64 Gear1::virq_inject(VcpuRef target, IrqLine line, bool charge, SimTime effect_delay) {
    if (!vcpu_exists(target))
        return HC_ENOTARGET;
    auto& gi = sys_->machine.gicc(target);
    int slot = gi.inject(line);
    u64 cost = charge ? sys_->costs.virq_inject_ns : 0;
    sys_->record(Actor::gear1(), Action::VirqInject, cost,
                 {target.vm, target.vcpu, line, slot});
    VcpuContext& ctx = contexts_.at(target);
    const VmManifest* m = manifest(target.vm);
    if (ctx.run == RunState::Blocked && ctx.block == BlockReason::Wfi) {
        ctx.run = RunState::Ready;
        ctx.block = BlockReason::None;
        PcpuId p = m->affinity.at(target.vcpu);
        if (m->kind == VmKind::Rtvm) {
            sys_->engine.schedule_in(effect_delay + cost, EventKind::GuestStep,
                                     [this, p, target] { sys_->rtvm_wake(p, target); });
        } else {
            sys_->gear2.on_ready(target, Cause::IrqFwd);
            sys_->kick_pcpu(p, effect_delay + cost);
        }
    }
    return HC_OK;
}

i64 Gear1::ivc_send(VmId src, VmId dst, u64 len, SimTime effect_delay) {
    if (!vm_exists(dst))
        return HC_ENOTARGET;
    IvcRing& ring = ivc_[{src, dst}];
    if (ring.messages.size() >= ring.depth)
        return HC_EAGAIN;
    ring.messages.push_back(len);
    sys_->record(Actor::guest(VcpuRef{src, 0}), Action::IvcSend, 0,
                 {src, dst, static_cast<i64>(len)});
    if (dst != primary_vm_)
        virq_inject(VcpuRef{dst, 0}, kIvcNotifyLine, false, effect_delay);
    return HC_OK;
}

// ---------------------------------------------------------- memory states

i64 Gear1::mem_share(VmId owner, Addr ipa_start, u64 pages, VmId target) {
    if (!vm_exists(target) || target == owner || pages == 0)
        return HC_EINVAL;
    Stage2Table& ot = tables_.at(owner);
    u64 first = page_of(ipa_start);
    for (u64 pg = first; pg < first + pages; ++pg) {
        auto it = ot.pages.find(pg);
        if (it == ot.pages.end() || it->second.own != Ownership::Owned)
            return HC_ENOTOWNER;
        if (!in_ram(page_addr(pg)))
            return HC_ENOTOWNER;
    }
    Stage2Table& tt = tables_.at(target);
    for (u64 pg = first; pg < first + pages; ++pg) {
        PageEntry& e = ot.pages.at(pg);
        e.own = Ownership::Lent;
        e.peer = target;
        tt.pages[pg] = PageEntry{page_addr(pg), true, true, Ownership::SharedFrom, owner};
    }
    sys_->record(Actor::gear1(), Action::MemShare, 0,
                 {owner, target, static_cast<i64>(first), static_cast<i64>(pages)});
    return HC_OK;
}

i64 Gear1::mem_reclaim(VmId owner, Addr ipa_start, u64 pages) {
    if (pages == 0)
        return HC_EINVAL;
    Stage2Table& ot = tables_.at(owner);
    u64 first = page_of(ipa_start);
    VmId target = 0;
    for (u64 pg = first; pg < first + pages; ++pg) {
        auto it = ot.pages.find(pg);
        if (it == ot.pages.end() || it->second.own != Ownership::Lent)
            return HC_ENOTLENT;
        target = it->second.peer;
    }
    for (u64 pg = first; pg < first + pages; ++pg) {
        PageEntry& e = ot.pages.at(pg);
        tables_.at(e.peer).pages.erase(pg);
        e.own = Ownership::Owned;
        e.peer = 0;
    }
    sys_->record(Actor::gear1(), Action::MemReclaim, 0,
                 {owner, target, static_cast<i64>(first), static_cast<i64>(pages)});
    return HC_OK;
}

// ------------------------------------------------------------------- GICD

u64 Gear1::emulate_gicd(VcpuRef caller, Addr addr, bool write, u64 value, u64* out,
                        SimTime base_delay) {
    Machine& mc = sys_->machine;
    if (mc.is_gicc(addr)) {
        // trapped per-CPU interface op: fixed-cost round trip
        if (out)
            *out = 0;
        return 0;
    }
    Addr off = addr - platform_.gicd_base;
    GicDistributor& gd = mc.gicd();
    const u32 lines = static_cast<u32>(gd.enabled.size());
    const std::set<IrqLine>& owned = owned_lines(caller.vm);
    bool is_primary = caller.vm == primary_vm_;

    auto may_touch = [&](IrqLine line) { return is_primary || owned.count(line) != 0; };

    if (off == kGicdCtlr) {
        if (out && !write)
            *out = 1;
        return 0;
    }
    if (off >= kGicdIsEnabler && off < kGicdIsEnabler + 0x80) {
        u32 word = static_cast<u32>((off - kGicdIsEnabler) / 4);
        if (write) {
            for (u32 bit = 0; bit < 32; ++bit) {
                if (!(value & (1ull << bit)))
                    continue;
                IrqLine line = word * 32 + bit;
                if (line >= lines)
                    continue;
                if (!may_touch(line)) {
                    ++gd.illegal_writes;
                    continue;
                }
                gd.enabled[line] = 1;
                if (gd.pending[line])
                    sys_->engine.schedule_in(base_delay, EventKind::IrqRaised,
                                             [this, line] { sys_->machine.flush_pending(line); });
            }
        } else if (out) {
            u64 mask = 0;
            for (u32 bit = 0; bit < 32; ++bit) {
                IrqLine line = word * 32 + bit;
                if (line < lines && gd.enabled[line])
                    mask |= 1ull << bit;
            }
            *out = mask;
        }
        return 0;
    }
    if (off >= kGicdIcEnabler && off < kGicdIcEnabler + 0x80) {
        u32 word = static_cast<u32>((off - kGicdIcEnabler) / 4);
        if (write) {
            for (u32 bit = 0; bit < 32; ++bit) {
                if (!(value & (1ull << bit)))
                    continue;
                IrqLine line = word * 32 + bit;
                if (line >= lines)
                    continue;
                if (!may_touch(line)) {
                    ++gd.illegal_writes;
                    continue;
                }
                gd.enabled[line] = 0;
            }
        }
        return 0;
    }
    if (off == kGicdSgir && write) {
        u32 line = static_cast<u32>(value & 0xF);
        u32 mode = static_cast<u32>((value >> 24) & 0x3);
        u64 mask = (value >> 16) & 0xFF;
        if (mode == 1)
            mask = (1ull << mc.pcpu_count()) - 1; // broadcast to all
        const auto& allowed = gd.sgi_filter[caller.vm];
        u64 extra = 0;
        for (PcpuId p = 0; p < mc.pcpu_count(); ++p) {
            if (!(mask & (1ull << p)))
                continue;
            if (!allowed.count(p)) {
                ++gd.sgi_filtered;
                sys_->record(Actor::gear1(), Action::SgiFiltered, 0,
                             {caller.vm, line, static_cast<i64>(p)});
                continue;
            }
            auto target = vcpu_on_pcpu(caller.vm, p);
            if (!target)
                continue;
            if (*target == caller)
                continue; // self-SGI is a no-op here
            virq_inject(*target, line, true, base_delay + extra);
            extra += sys_->costs.virq_inject_ns;
        }
        return extra;
    }
    if (off >= kGicdRouter && off < kGicdRouter + 8ull * lines) {
        u32 line = static_cast<u32>((off - kGicdRouter) / 8);
        if (write) {
            VcpuRef tgt{static_cast<VmId>(value >> 16), static_cast<VcpuId>(value & 0xFFFF)};
            if (!may_touch(line) || !vcpu_exists(tgt)) {
                ++gd.illegal_writes;
                return 0;
            }
            gd.route[line] = tgt;
        } else if (out) {
            auto r = gd.route[line];
            *out = r ? ((static_cast<u64>(r->vm) << 16) | r->vcpu) : ~0ull;
        }
        return 0;
    }
    // unknown register: reads as zero, writes ignored-and-counted
    if (write)
        ++gd.illegal_writes;
    else if (out)
        *out = 0;
    return 0;
}

// ----------------------------------------------------------------- timers

void Gear1::el2_multiplex_update(PcpuId p) {
    // nearest deadline among offline (not currently executing) vcpus bound
    // to this pcpu with an armed EL1 timer
    std::optional<u64> best;
    VcpuRef who{};
    const Pcpu& pc = sys_->machine.pcpu(p);
    for (const VmManifest& m : manifests_) {
        for (u32 c = 0; c < m.vcpus; ++c) {
            if (m.affinity[c] != p)
                continue;
            VcpuRef v{m.id, c};
            if (pc.in_guest && pc.guest == v)
                continue; // online: direct delivery
            const El1Timer& t = sys_->machine.el1_timer(v);
            if (!t.enabled)
                continue;
            if (!best || t.cmp < *best) {
                best = t.cmp;
                who = v;
            }
        }
    }
    if (best)
        sys_->machine.arm_el2(p, *best, who);
    else
        sys_->machine.disarm_el2(p);
}

void Gear1::on_el1_timer_fire(VcpuRef v) {
    const VmManifest* m = manifest(v.vm);
    VcpuContext& ctx = contexts_.at(v);
    if (m->kind == VmKind::Rtvm) {
        virq_inject(v, kTimerVirqLine, /*charge=*/false); // pass-through timer
        return;
    }
    PcpuId p = m->affinity.at(v.vcpu);
    Pcpu& pc = sys_->machine.pcpu(p);
    if (pc.in_guest && pc.guest == v && ctx.run == RunState::Running) {
        sys_->interrupt_guest(p, ExitReason{ExitReason::PhysIrq, kTimerVirqLine});
        return;
    }
    // raced a deschedule: behave like a multiplexed wake
    virq_inject(v, kTimerVirqLine, true, 0);
}

void Gear1::on_el2_timer_fire(PcpuId p, VcpuRef target) {
    // gear1 owns the EL2 physical timer; the fire is handled entirely here
    El1Timer& t = sys_->machine.el1_timer(target);
    t.enabled = false;
    ++t.gen;

    Pcpu& pc = sys_->machine.pcpu(p);
    const CostModel& cm = sys_->costs;
    if (pc.in_guest) {
        VcpuRef cur = pc.guest;
        sys_->guests.preempt_compute(cur);
        ++pc.chain_gen;
        ++exits_[cur.vm];
        sys_->record(Actor::gear1(), Action::VmTrap, cm.vm_trap_ns,
                     {cur.vm, cur.vcpu, ExitReason::PhysIrq, static_cast<i64>(p)});
        virq_inject(target, kTimerVirqLine, true, cm.vm_trap_ns);
        el2_multiplex_update(p);
        sys_->guest_continue(p, cm.vm_trap_ns + cm.virq_inject_ns);
    } else {
        virq_inject(target, kTimerVirqLine, true, 0);
        el2_multiplex_update(p);
    }
}

// ---------------------------------------------------------------- restart

void Gear1::restart_vm(VmId vm) {
    const VmManifest* m = manifest(vm);
    if (!m)
        return;
    sys_->record(Actor::gear1(), Action::VmRestart, 0, {vm});

    // drop every sharing relationship this vm participates in
    Stage2Table& t = tables_.at(vm);
    std::vector<u64> drop;
    for (auto& [pg, e] : t.pages) {
        if (e.own == Ownership::Lent) {
            tables_.at(e.peer).pages.erase(pg);
            e.own = Ownership::Owned;
            e.peer = 0;
        } else if (e.own == Ownership::SharedFrom) {
            PageEntry& oe = tables_.at(e.peer).pages.at(pg);
            oe.own = Ownership::Owned;
            oe.peer = 0;
            drop.push_back(pg);
        }
    }
    for (u64 pg : drop)
        t.pages.erase(pg);

    for (u32 c = 0; c < m->vcpus; ++c) {
        VcpuRef v{vm, c};
        PcpuId p = m->affinity[c];
        Pcpu& pc = sys_->machine.pcpu(p);
        if (pc.in_guest && pc.guest == v) {
            ++pc.chain_gen;
            pc.in_guest = false;
        }
        contexts_.at(v) = VcpuContext{};
        contexts_.at(v).run = RunState::Ready;
        sys_->machine.disarm_el1(v);
        auto& gi = sys_->machine.gicc(v);
        gi = GicCpuInterface(platform_.list_registers);
        el2_multiplex_update(p);
    }
    sys_->guests.reset_vm(vm);

    if (m->kind == VmKind::Rtvm) {
        launch_rtvm(m->affinity[0], VcpuRef{vm, 0});
    } else {
        sys_->gear2.on_vm_restarted(vm);
    }
}

// ------------------------------------------------------------------ misc

std::vector<MemRegion> Gear1::allocate_colored(Addr base, u64 pool_pages, u64 pages,
                                               u64 color_mask, u32 colors) {
    std::vector<MemRegion> out;
    u64 taken = 0;
    u64 run_start = 0, run_len = 0;
    for (u64 i = 0; i < pool_pages && taken < pages; ++i) {
        u64 pg = page_of(base) + i;
        u32 c = static_cast<u32>(pg & (colors - 1));
        if (color_mask & (1ull << c)) {
            if (run_len == 0)
                run_start = page_addr(pg);
            run_len += kPageSize;
            ++taken;
        } else if (run_len) {
            out.push_back({run_start, run_len});
            run_len = 0;
        }
    }
    if (run_len)
        out.push_back({run_start, run_len});
    if (taken < pages)
        throw ConfigError(ConfigErrc::ColorMask, "color pool exhausted");
    return out;
}

u64 Gear1::vm_exits(VmId vm) const {
    auto it = exits_.find(vm);
    return it == exits_.end() ? 0 : it->second;
}

u64 Gear1::gear2_hops(VmId vm) const {
    auto it = hops_.find(vm);
    return it == hops_.end() ? 0 : it->second;
}

u64 Gear1::gicd_traps(VmId vm) const {
    auto it = gicd_traps_count_.find(vm);
    return it == gicd_traps_count_.end() ? 0 : it->second;
}

} // namespace gearsim
