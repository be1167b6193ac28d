/*
 * Copyright (c) 2026 the gearsim authors.
 * SPDX-License-Identifier: Apache-2.0
 */
#include "gearsim/machine.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <stdexcept>

#include "gearsim/system.hpp"

namespace gearsim {

// ---------------------------------------------------------------- GicCpuIf

bool GicCpuInterface::has_pending() const {
    if (!overflow.empty())
        return true;
    for (const auto& e : lr)
        if (e)
            return true;
    return false;
}

u64 GicCpuInterface::pending_count() const {
    u64 n = overflow.size();
    for (const auto& e : lr)
        if (e)
            ++n;
    return n;
}

int GicCpuInterface::inject(IrqLine line) {
    ++injected;
    for (size_t i = 0; i < lr.size(); ++i) {
        if (!lr[i]) {
            lr[i] = LrEntry{line, 0};
            return static_cast<int>(i);
        }
    }
    overflow.push_back(line);
    return -1;
}

std::optional<IrqLine> GicCpuInterface::pop() {
    for (auto& e : lr) {
        if (e) {
            IrqLine line = e->line;
            e.reset();
            if (!overflow.empty()) { // refill the freed slot
                e = LrEntry{overflow.front(), 0};
                overflow.pop_front();
            }
            ++delivered;
            return line;
        }
    }
    return std::nullopt;
}

// ------------------------------------------------------------------- LLC

void LlcModel::configure(const LlcConfig& geo) {
    if (!std::has_single_bit(geo.sets) || !std::has_single_bit(geo.line_bytes))
        throw ConfigError(ConfigErrc::Schema, "llc sets and line_bytes must be powers of two");
    geo_ = geo;
    set_shift_ = static_cast<u32>(std::countr_zero(geo.line_bytes));
    u64 span = static_cast<u64>(geo.sets) * geo.line_bytes;
    colors_ = span > kPageSize ? static_cast<u32>(span / kPageSize) : 1;
    sets_.assign(geo.sets, {});
    stats_ = Stats{};
    lru_clock_ = 0;
}

u32 LlcModel::color_of(Addr pa) const {
    return static_cast<u32>((pa >> kPageShift) & (colors_ - 1));
}

LlcOutcome LlcModel::access(VmId vm, Addr pa) {
    if (log_accesses)
        access_log.emplace_back(vm, pa);
    u64 line_addr = pa >> set_shift_;
    u32 set = static_cast<u32>(line_addr & (geo_.sets - 1));
    u64 tag = line_addr >> std::countr_zero(geo_.sets);
    auto& entries = sets_[set];

    for (auto& e : entries) {
        if (e.tag == tag) {
            e.lru = ++lru_clock_;
            e.vm = vm;
            ++stats_.hits;
            return LlcOutcome::Hit;
        }
    }
    if (entries.size() < geo_.ways) {
        entries.push_back({vm, tag, ++lru_clock_});
        ++stats_.cold;
        return LlcOutcome::MissCold;
    }
    auto victim = std::min_element(entries.begin(), entries.end(),
                                   [](const Entry& a, const Entry& b) { return a.lru < b.lru; });
    LlcOutcome out = victim->vm == vm ? LlcOutcome::MissSelf : LlcOutcome::MissCross;
    if (out == LlcOutcome::MissSelf)
        ++stats_.self_conflict;
    else
        ++stats_.cross_conflict;
    *victim = {vm, tag, ++lru_clock_};
    return out;
}

// --------------------------------------------------------------- Machine

void Machine::configure(const PlatformConfig& cfg) {
    cfg_ = cfg;
    pcpus_.clear();
    for (const auto& pc : cfg.pcpus) {
        Pcpu p;
        p.id = pc.id;
        p.cluster = pc.cluster;
        pcpus_.push_back(p);
    }
    for (size_t i = 0; i < pcpus_.size(); ++i)
        if (pcpus_[i].id != i)
            throw ConfigError(ConfigErrc::Schema, "pcpu ids must be contiguous from 0");

    gicd_.enabled.assign(cfg.irq_lines, 0);
    gicd_.pending.assign(cfg.irq_lines, 0);
    gicd_.route.assign(cfg.irq_lines, std::nullopt);

    llc_.configure(cfg.llc);

    devices_.clear();
    for (size_t i = 0; i < cfg.devices.size(); ++i) {
        DeviceState d;
        d.cfg = cfg.devices[i];
        d.index = static_cast<u32>(i);
        if (d.cfg.irq_line >= cfg.irq_lines)
            throw ConfigError(ConfigErrc::UnknownRef,
                              "device '" + d.cfg.name + "' irq line out of range");
        devices_.push_back(d);
    }
    // MMIO ranges of distinct devices (and the GIC windows) are disjoint
    std::vector<std::pair<Addr, u64>> ranges;
    ranges.emplace_back(cfg.gicd_base, cfg.gicd_len);
    ranges.emplace_back(cfg.gicc_base, cfg.gicc_len);
    for (const auto& d : devices_)
        ranges.emplace_back(d.cfg.mmio_base, d.cfg.mmio_len);
    std::sort(ranges.begin(), ranges.end());
    for (size_t i = 1; i < ranges.size(); ++i)
        if (ranges[i - 1].first + ranges[i - 1].second > ranges[i].first)
            throw ConfigError(ConfigErrc::MmioOverlap, "device MMIO ranges overlap");
}

GicCpuInterface& Machine::gicc(VcpuRef v) {
    auto it = gicc_.find(v);
    if (it == gicc_.end())
        throw std::invalid_argument("unknown vcpu");
    return it->second;
}

void Machine::add_vcpu(VcpuRef v) {
    gicc_.emplace(v, GicCpuInterface(cfg_.list_registers));
    el1_[v];
}

bool Machine::is_gic_range(Addr a) const {
    return is_gicd(a) || is_gicc(a);
}

DeviceState* Machine::device_at(Addr pa) {
    for (auto& d : devices_)
        if (pa >= d.cfg.mmio_base && pa < d.cfg.mmio_base + d.cfg.mmio_len)
            return &d;
    return nullptr;
}

DeviceState* Machine::device_by_name(const std::string& name) {
    for (auto& d : devices_)
        if (d.cfg.name == name)
            return &d;
    return nullptr;
}

DeviceState* Machine::device_by_index(u32 idx) {
    return idx < devices_.size() ? &devices_[idx] : nullptr;
}

// ------------------------------------------------------------ interrupts

IrqOutcome Machine::raise_irq(IrqLine line) {
    if (line >= cfg_.irq_lines)
        throw std::invalid_argument("raise_irq: unknown line");
    ++irqs_raised_;
    Engine& eng = sys_->engine;

    if (!gicd_.enabled[line]) {
        gicd_.pending[line] = 1;
        eng.record(Actor::machine(), Action::IrqPending, 0, {line});
        return IrqOutcome::Pending;
    }
    auto target = gicd_.route[line];
    if (!target)
        throw std::invalid_argument("raise_irq: line has no route");
    eng.record(Actor::machine(), Action::IrqRaised, 0,
               {line, target->vm, target->vcpu});

    const VmManifest* m = sys_->gear1.manifest(target->vm);
    if (!m)
        throw std::invalid_argument("raise_irq: route references unknown vm");

    if (m->kind == VmKind::Rtvm) {
        // pass-through delivery, no hypervisor involvement
        eng.record(Actor::machine(), Action::IrqDirect, 0, {line, target->vm, target->vcpu});
        sys_->gear1.virq_inject(*target, line, /*charge=*/false);
        return IrqOutcome::DirectRtvm;
    }

    PcpuId p = m->affinity.at(target->vcpu);
    Pcpu& pc = pcpus_.at(p);
    if (!pc.on) {
        gicd_.pending[line] = 1;
        eng.record(Actor::machine(), Action::IrqPending, 0, {line});
        return IrqOutcome::Pending;
    }

    if (target->vm == sys_->gear1.primary_vm()) {
        if (pc.in_guest) {
            sys_->interrupt_guest(p, ExitReason{ExitReason::PhysIrq, line});
            return IrqOutcome::Trapped;
        }
        eng.record(Actor::machine(), Action::IrqDirect, 0, {line, target->vm, target->vcpu});
        sys_->gear2.on_phys_irq(p, line);
        return IrqOutcome::DirectPrimary;
    }

    if (pc.in_guest) {
        // hits a secondary world: trap into gear1, then gear2 handoff
        sys_->interrupt_guest(p, ExitReason{ExitReason::PhysIrq, line});
        return IrqOutcome::Trapped;
    }
    // pcpu sits in the primary world: delivered to Gear2 directly
    eng.record(Actor::machine(), Action::IrqDirect, 0, {line, target->vm, target->vcpu});
    sys_->gear2.on_phys_irq(p, line);
    return IrqOutcome::ForwardedIdle;
}

void Machine::flush_pending(IrqLine line) {
    if (line < cfg_.irq_lines && gicd_.pending[line] && gicd_.enabled[line]) {
        gicd_.pending[line] = 0;
        raise_irq(line);
    }
}

// ---------------------------------------------------------------- memory

AccessResult Machine::mem_access(VcpuRef world, Addr ipa, bool write, u32 size, u64 value) {
    AccessResult res;
    TranslateResult tr = sys_->gear1.translate(world.vm, ipa);
    if (tr.kind == TranslateResult::FaultMmio) {
        res.kind = AccessOutcome::FaultMmio;
        return res;
    }
    if (tr.kind == TranslateResult::FaultPerm) {
        res.kind = AccessOutcome::FaultPerm;
        return res;
    }
    res.pa = tr.pa;
    if (is_gic_range(tr.pa)) {
        // pass-through per-CPU interface: plain hardware access, no fault
        res.value = 0;
        return res;
    }
    if (DeviceState* dev = device_at(tr.pa)) {
        u64 out = 0;
        device_mmio(*dev, tr.pa - dev->cfg.mmio_base, write, value, &out);
        res.value = out;
        return res;
    }
    if (write)
        ram_write(tr.pa, size, value);
    else
        res.value = ram_read(tr.pa, size);
    res.llc = llc_.access(world.vm, tr.pa);
    return res;
}

u64 Machine::ram_read(Addr pa, u32 size) const {
    u64 v = 0;
    for (u32 i = 0; i < size && i < 8; ++i) {
        auto it = ram_.find(page_of(pa + i));
        u8 byte = 0;
        if (it != ram_.end())
            byte = (*it->second)[(pa + i) & (kPageSize - 1)];
        v |= static_cast<u64>(byte) << (8 * i);
    }
    return v;
}

void Machine::ram_write(Addr pa, u32 size, u64 value) {
    for (u32 i = 0; i < size && i < 8; ++i) {
        auto& page = ram_[page_of(pa + i)];
        if (!page)
            page = std::make_unique<std::vector<u8>>(kPageSize, 0);
        (*page)[(pa + i) & (kPageSize - 1)] = static_cast<u8>(value >> (8 * i));
    }
}

// ---------------------------------------------------------------- timers

void Machine::arm_el1(VcpuRef v, u64 cmp) {
    El1Timer& t = el1_.at(v);
    t.cmp = cmp;
    t.enabled = true;
    u64 gen = ++t.gen;
    SimTime at = std::max<SimTime>(cmp, sys_->now());
    sys_->engine.schedule(at, EventKind::TimerFire, [this, v, gen] { el1_fire(v, gen); });
}

void Machine::disarm_el1(VcpuRef v) {
    El1Timer& t = el1_.at(v);
    t.enabled = false;
    ++t.gen;
}

void Machine::el1_fire(VcpuRef v, u64 gen) {
    El1Timer& t = el1_.at(v);
    if (!t.enabled || t.gen != gen)
        return; // re-armed or absorbed by the EL2 multiplexer
    t.enabled = false; // auto-disarm until reprogrammed
    sys_->engine.record(Actor::machine(), Action::TimerFire, 0,
                        {1, v.vm, v.vcpu, static_cast<i64>(t.cmp)});
    ++timer_virqs_;
    sys_->gear1.on_el1_timer_fire(v);
}

void Machine::arm_el2(PcpuId p, u64 cmp, VcpuRef target) {
    El2Timer& t = el2_[p];
    t.cmp = cmp;
    t.enabled = true;
    t.target = target;
    u64 gen = ++t.gen;
    SimTime at = std::max<SimTime>(cmp, sys_->now());
    sys_->engine.schedule(at, EventKind::TimerFire, [this, p, gen] { el2_fire(p, gen); });
}

void Machine::disarm_el2(PcpuId p) {
    El2Timer& t = el2_[p];
    t.enabled = false;
    ++t.gen;
}

void Machine::el2_fire(PcpuId p, u64 gen) {
    El2Timer& t = el2_[p];
    if (!t.enabled || t.gen != gen)
        return;
    t.enabled = false;
    VcpuRef target = t.target;
    sys_->engine.record(Actor::machine(), Action::TimerFire, 0,
                        {2, target.vm, target.vcpu, static_cast<i64>(t.cmp)});
    ++timer_virqs_;
    sys_->gear1.on_el2_timer_fire(p, target);
}

// --------------------------------------------------------------- devices

void Machine::device_mmio(DeviceState& dev, Addr offset, bool write, u64 value, u64* out) {
    if (offset == 0) { // stream control register
        if (write) {
            if (value != 0 && dev.cfg.stream_rate_hz > 0 && !dev.streaming) {
                dev.streaming = true;
                u64 gen = ++dev.stream_gen;
                u64 period = std::max<u64>(1, 1'000'000'000ull / dev.cfg.stream_rate_hz);
                u32 idx = dev.index;
                sys_->engine.schedule_in(period, EventKind::IoComplete,
                                         [this, idx, gen, period] { stream_tick(idx, gen, period); });
            } else if (value == 0) {
                dev.streaming = false;
                ++dev.stream_gen;
            }
        } else if (out) {
            *out = dev.streaming ? 1 : 0;
        }
        return;
    }
    if (offset == 8) { // raised-count status register
        if (!write && out)
            *out = dev.raised;
        return;
    }
    if (offset < 64)
        return; // reserved control window
    // data window: linear view of the backing store
    u64 idx = offset - 64;
    switch (dev.cfg.behavior) {
    case DeviceKind::Block: {
        auto& img = sys_->gdm.store().image;
        if (idx + 8 > img.size())
            img.resize(idx + 8, 0);
        if (write) {
            for (int i = 0; i < 8; ++i)
                img[idx + i] = static_cast<u8>(value >> (8 * i));
        } else if (out) {
            u64 v = 0;
            for (int i = 0; i < 8; ++i)
                v |= static_cast<u64>(img[idx + i]) << (8 * i);
            *out = v;
        }
        break;
    }
    case DeviceKind::Console:
        if (write)
            sys_->gdm.store().console_log.push_back(static_cast<char>(value & 0xFF));
        break;
    case DeviceKind::Net:
        if (write)
            sys_->gdm.store().net_loopback.push_back(static_cast<u8>(value & 0xFF));
        else if (out) {
            auto& q = sys_->gdm.store().net_loopback;
            *out = q.empty() ? 0 : q.front();
            if (!q.empty())
                q.pop_front();
        }
        break;
    case DeviceKind::Custom:
        if (!write && out)
            *out = 0;
        break;
    }
}

void Machine::stream_tick(u32 dev_index, u64 gen, u64 period) {
    DeviceState& dev = devices_.at(dev_index);
    if (!dev.streaming || dev.stream_gen != gen)
        return;
    ++dev.raised;
    raise_irq(dev.cfg.irq_line);
    sys_->engine.schedule_in(period, EventKind::IoComplete,
                             [this, dev_index, gen, period] { stream_tick(dev_index, gen, period); });
}

void Machine::stop_streams() {
    for (auto& d : devices_) {
        d.streaming = false;
        ++d.stream_gen;
    }
}

} // namespace gearsim
