/*
 * Copyright (c) 2026 the gearsim authors.
 * SPDX-License-Identifier: Apache-2.0
 */
#include "gearsim/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "gearsim/guest.hpp"
#include "gearsim/watchdog.hpp"

namespace gearsim {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) {
    throw ConfigError(ConfigErrc::Schema, "scenario: " + msg);
}

u64 get_u64(const json& j, const char* key, u64 def) {
    if (!j.contains(key))
        return def;
    const json& v = j.at(key);
    if (v.is_string())
        return std::stoull(v.get<std::string>(), nullptr, 0);
    if (!v.is_number_unsigned() && !v.is_number_integer())
        fail(std::string(key) + ": expected integer");
    return v.get<u64>();
}

bool get_bool(const json& j, const char* key, bool def) {
    if (!j.contains(key))
        return def;
    if (!j.at(key).is_boolean())
        fail(std::string(key) + ": expected boolean");
    return j.at(key).get<bool>();
}

std::string get_str(const json& j, const char* key, const std::string& def) {
    if (!j.contains(key))
        return def;
    if (!j.at(key).is_string())
        fail(std::string(key) + ": expected string");
    return j.at(key).get<std::string>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> allowed,
                    const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k)
                ok = true;
        if (!ok)
            fail("unknown key '" + it.key() + "' in " + where);
    }
}

SupAction parse_action(const std::string& s) {
    if (s == "log_only")
        return SupAction::LogOnly;
    if (s == "restart_vm")
        return SupAction::RestartVm;
    if (s == "restart_gear2")
        return SupAction::RestartGear2;
    if (s == "soc_reset")
        return SupAction::SocReset;
    fail("unknown supervision action '" + s + "'");
}

LayerConfig parse_layer(const json& j, const LayerConfig& def, const char* name) {
    if (!j.contains(name))
        return def;
    const json& l = j.at(name);
    reject_unknown(l, {"period_ns", "action", "enabled"}, name);
    LayerConfig out = def;
    out.period_ns = get_u64(l, "period_ns", def.period_ns);
    out.action = parse_action(get_str(l, "action", sup_action_name(def.action)));
    out.enabled = get_bool(l, "enabled", def.enabled);
    return out;
}

std::vector<MemRegion> parse_regions(const json& j, const char* key) {
    std::vector<MemRegion> out;
    if (!j.contains(key))
        return out;
    const json& arr = j.at(key);
    if (!arr.is_array())
        fail(std::string(key) + ": expected array of [start, len]");
    for (const json& e : arr) {
        if (!e.is_array() || e.size() != 2)
            fail(std::string(key) + ": each region is [start, len]");
        MemRegion r;
        r.start = e[0].is_string() ? std::stoull(e[0].get<std::string>(), nullptr, 0)
                                   : e[0].get<u64>();
        r.len = e[1].is_string() ? std::stoull(e[1].get<std::string>(), nullptr, 0)
                                 : e[1].get<u64>();
        out.push_back(r);
    }
    return out;
}

} // namespace

ScenarioConfig parse_scenario(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(std::string("invalid JSON: ") + e.what());
    }
    reject_unknown(j,
                   {"name", "seed", "duration_ns", "platform", "vms", "cost_model", "workloads",
                    "supervision", "sched", "dvm_ring_depth", "ring_retry_ns",
                    "gdm_kernel_module", "block_image", "gear2_stall_at", "vm_stall_at",
                    "stall_vms", "bench"},
                   "top level");

    ScenarioConfig cfg;
    cfg.name = get_str(j, "name", "scenario");
    cfg.seed = get_u64(j, "seed", 0);
    cfg.duration_ns = get_u64(j, "duration_ns", cfg.duration_ns);
    cfg.dvm_ring_depth = static_cast<u32>(get_u64(j, "dvm_ring_depth", cfg.dvm_ring_depth));
    cfg.ring_retry_ns = get_u64(j, "ring_retry_ns", cfg.ring_retry_ns);
    cfg.gdm_kernel_module = get_bool(j, "gdm_kernel_module", false);
    cfg.block_image = get_str(j, "block_image", "");
    cfg.gear2_stall_at = get_u64(j, "gear2_stall_at", 0);
    cfg.vm_stall_at = get_u64(j, "vm_stall_at", 0);
    if (j.contains("stall_vms"))
        for (const json& e : j.at("stall_vms"))
            cfg.stall_vms.push_back(e.get<VmId>());

    if (j.contains("platform")) {
        const json& p = j.at("platform");
        reject_unknown(p,
                       {"pcpus", "pcpu_count", "big_count", "ram_base", "ram_pages",
                        "gear1_reserved_pages", "gicd_base", "gicd_len", "gicc_base", "gicc_len",
                        "irq_lines", "list_registers", "llc", "devices"},
                       "platform");
        PlatformConfig& plat = cfg.platform;
        if (p.contains("pcpus")) {
            for (const json& e : p.at("pcpus")) {
                reject_unknown(e, {"id", "cluster"}, "pcpu");
                PcpuConfig pc;
                pc.id = static_cast<PcpuId>(get_u64(e, "id", 0));
                std::string cl = get_str(e, "cluster", "big");
                if (cl != "big" && cl != "little")
                    fail("pcpu cluster must be big|little");
                pc.cluster = cl == "big" ? Cluster::Big : Cluster::Little;
                plat.pcpus.push_back(pc);
            }
        } else {
            u64 n = get_u64(p, "pcpu_count", 4);
            u64 big = get_u64(p, "big_count", n);
            for (u64 i = 0; i < n; ++i)
                plat.pcpus.push_back(
                    {static_cast<PcpuId>(i), i < big ? Cluster::Big : Cluster::Little});
        }
        plat.ram_base = get_u64(p, "ram_base", plat.ram_base);
        plat.ram_pages = get_u64(p, "ram_pages", plat.ram_pages);
        plat.gear1_reserved_pages =
            static_cast<u32>(get_u64(p, "gear1_reserved_pages", plat.gear1_reserved_pages));
        plat.gicd_base = get_u64(p, "gicd_base", plat.gicd_base);
        plat.gicd_len = get_u64(p, "gicd_len", plat.gicd_len);
        plat.gicc_base = get_u64(p, "gicc_base", plat.gicc_base);
        plat.gicc_len = get_u64(p, "gicc_len", plat.gicc_len);
        plat.irq_lines = static_cast<u32>(get_u64(p, "irq_lines", plat.irq_lines));
        plat.list_registers = static_cast<u32>(get_u64(p, "list_registers", plat.list_registers));
        if (p.contains("llc")) {
            const json& l = p.at("llc");
            reject_unknown(l, {"sets", "ways", "line_bytes"}, "llc");
            plat.llc.sets = static_cast<u32>(get_u64(l, "sets", plat.llc.sets));
            plat.llc.ways = static_cast<u32>(get_u64(l, "ways", plat.llc.ways));
            plat.llc.line_bytes = static_cast<u32>(get_u64(l, "line_bytes", plat.llc.line_bytes));
        }
        if (p.contains("devices")) {
            for (const json& e : p.at("devices")) {
                reject_unknown(e,
                               {"name", "mmio_base", "mmio_len", "irq_line", "behavior",
                                "stream_rate_hz"},
                               "device");
                DeviceConfig d;
                d.name = get_str(e, "name", "");
                if (d.name.empty())
                    fail("device needs a name");
                d.mmio_base = get_u64(e, "mmio_base", 0);
                d.mmio_len = get_u64(e, "mmio_len", kPageSize);
                d.irq_line = static_cast<IrqLine>(get_u64(e, "irq_line", 0));
                std::string b = get_str(e, "behavior", "custom");
                if (b == "block")
                    d.behavior = DeviceKind::Block;
                else if (b == "console")
                    d.behavior = DeviceKind::Console;
                else if (b == "net")
                    d.behavior = DeviceKind::Net;
                else if (b == "custom")
                    d.behavior = DeviceKind::Custom;
                else
                    fail("device behavior must be block|console|net|custom");
                d.stream_rate_hz = get_u64(e, "stream_rate_hz", 0);
                plat.devices.push_back(d);
            }
        }
    }

    if (j.contains("vms")) {
        for (const json& e : j.at("vms")) {
            reject_unknown(e,
                           {"id", "kind", "vcpus", "affinity", "mem_regions", "mmio_holes",
                            "passthrough", "color_mask", "watchdog_period_ns",
                            "vgic_passthrough"},
                           "vm");
            VmManifest m;
            m.id = static_cast<VmId>(get_u64(e, "id", 0));
            std::string k = get_str(e, "kind", "secondary");
            if (k == "primary")
                m.kind = VmKind::Primary;
            else if (k == "secondary")
                m.kind = VmKind::Secondary;
            else if (k == "dvm")
                m.kind = VmKind::Dvm;
            else if (k == "rtvm")
                m.kind = VmKind::Rtvm;
            else
                fail("vm kind must be primary|secondary|dvm|rtvm");
            m.vcpus = static_cast<u32>(get_u64(e, "vcpus", 1));
            if (e.contains("affinity"))
                for (const json& a : e.at("affinity"))
                    m.affinity.push_back(a.get<PcpuId>());
            m.mem_regions = parse_regions(e, "mem_regions");
            m.mmio_holes = parse_regions(e, "mmio_holes");
            if (e.contains("passthrough"))
                for (const json& a : e.at("passthrough"))
                    m.passthrough.push_back(a.get<std::string>());
            m.color_mask = get_u64(e, "color_mask", ~0ull);
            m.watchdog_period_ns = get_u64(e, "watchdog_period_ns", 0);
            m.vgic_passthrough = get_bool(e, "vgic_passthrough", true);
            cfg.vms.push_back(m);
        }
    }

    if (j.contains("cost_model")) {
        const json& c = j.at("cost_model");
        reject_unknown(c,
                       {"hypercall_ns", "vm_trap_ns", "world_switch_ns", "virq_inject_ns",
                        "gicd_emul_ns", "el3_hop_ns", "gdm_user_hop_ns", "per_byte_copy_ns",
                        "guest_op_ns", "mem_touch_ns"},
                       "cost_model");
        CostModel& cm = cfg.cost_model;
        cm.hypercall_ns = get_u64(c, "hypercall_ns", cm.hypercall_ns);
        cm.vm_trap_ns = get_u64(c, "vm_trap_ns", cm.vm_trap_ns);
        cm.world_switch_ns = get_u64(c, "world_switch_ns", cm.world_switch_ns);
        cm.virq_inject_ns = get_u64(c, "virq_inject_ns", cm.virq_inject_ns);
        cm.gicd_emul_ns = get_u64(c, "gicd_emul_ns", cm.gicd_emul_ns);
        cm.el3_hop_ns = get_u64(c, "el3_hop_ns", cm.el3_hop_ns);
        cm.gdm_user_hop_ns = get_u64(c, "gdm_user_hop_ns", cm.gdm_user_hop_ns);
        cm.per_byte_copy_ns = get_u64(c, "per_byte_copy_ns", cm.per_byte_copy_ns);
        cm.guest_op_ns = get_u64(c, "guest_op_ns", cm.guest_op_ns);
        cm.mem_touch_ns = get_u64(c, "mem_touch_ns", cm.mem_touch_ns);
    }

    if (j.contains("workloads")) {
        for (const json& e : j.at("workloads")) {
            reject_unknown(e, {"vm", "vcpu", "program"}, "workload");
            WorkloadAssign w;
            w.vm = static_cast<VmId>(get_u64(e, "vm", 0));
            w.vcpu = static_cast<VcpuId>(get_u64(e, "vcpu", 0));
            if (e.contains("program"))
                for (const json& l : e.at("program"))
                    w.program.push_back(l.get<std::string>());
            cfg.workloads.push_back(w);
        }
    }

    if (j.contains("supervision")) {
        const json& s = j.at("supervision");
        reject_unknown(s,
                       {"enabled", "l1", "l2", "l3", "l4", "escalate_threshold",
                        "escalate_window_ns"},
                       "supervision");
        cfg.supervision.enabled = get_bool(s, "enabled", true);
        cfg.supervision.l1 = parse_layer(s, cfg.supervision.l1, "l1");
        cfg.supervision.l2 = parse_layer(s, cfg.supervision.l2, "l2");
        cfg.supervision.l3 = parse_layer(s, cfg.supervision.l3, "l3");
        cfg.supervision.l4 = parse_layer(s, cfg.supervision.l4, "l4");
        cfg.supervision.escalate_threshold =
            static_cast<u32>(get_u64(s, "escalate_threshold", cfg.supervision.escalate_threshold));
        cfg.supervision.escalate_window_ns =
            get_u64(s, "escalate_window_ns", cfg.supervision.escalate_window_ns);
    }

    if (j.contains("sched")) {
        const json& s = j.at("sched");
        reject_unknown(s, {"policy", "quantum_ns"}, "sched");
        cfg.sched.policy = get_str(s, "policy", cfg.sched.policy);
        cfg.sched.quantum_ns = get_u64(s, "quantum_ns", cfg.sched.quantum_ns);
    }

    validate_scenario(cfg);
    return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream f(path);
    if (!f)
        throw ConfigError(ConfigErrc::Schema, "cannot open scenario file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_scenario(ss.str());
}

void validate_scenario(const ScenarioConfig& cfg) {
    if (cfg.platform.pcpus.empty())
        fail("platform needs at least one pcpu");
    if (cfg.duration_ns == 0)
        fail("duration_ns must be positive");
    std::set<std::string> dev_names;
    for (const DeviceConfig& d : cfg.platform.devices)
        if (!dev_names.insert(d.name).second)
            fail("duplicate device name '" + d.name + "'");
    std::set<VmId> vm_ids;
    for (const VmManifest& m : cfg.vms)
        vm_ids.insert(m.id);
    for (const WorkloadAssign& w : cfg.workloads) {
        if (!vm_ids.count(w.vm))
            throw ConfigError(ConfigErrc::UnknownRef,
                              "workload references unknown vm " + std::to_string(w.vm));
        parse_program(w.program); // surfaces instruction errors at load time
    }
    for (VmId v : cfg.stall_vms)
        if (!vm_ids.count(v))
            throw ConfigError(ConfigErrc::UnknownRef, "stall_vms references unknown vm");
    if (cfg.sched.policy != "round_robin")
        fail("unknown scheduler policy '" + cfg.sched.policy + "'");
}

const DeviceConfig* find_device(const PlatformConfig& p, const std::string& name) {
    for (const DeviceConfig& d : p.devices)
        if (d.name == name)
            return &d;
    return nullptr;
}

} // namespace gearsim
