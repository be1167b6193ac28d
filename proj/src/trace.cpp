/*
 * Copyright (c) 2026 the gearsim authors.
 * SPDX-License-Identifier: Apache-2.0
 */
#include "gearsim/trace.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <ostream>

namespace gearsim {

const char* vm_kind_name(VmKind k) {
    switch (k) {
    case VmKind::Primary: return "primary";
    case VmKind::Secondary: return "secondary";
    case VmKind::Dvm: return "dvm";
    case VmKind::Rtvm: return "rtvm";
    }
    return "?";
}

namespace {

struct ActionInfo {
    const char* name;
    // argument names in serialization order; nullptr-terminated by argc
    std::array<const char*, 4> args;
};

// Append-only: names and argument order are part of the canonical format.
const ActionInfo& info(Action a) {
    static const ActionInfo table[] = {
        {"irq_raised", {"line", "vm", "vcpu"}},
        {"irq_pending", {"line"}},
        {"irq_direct", {"line", "vm", "vcpu"}},
        {"timer_fire", {"unit", "vm", "vcpu", "cmp"}},
        {"sgi_filtered", {"vm", "line", "pcpu"}},
        {"vm_trap", {"vm", "vcpu", "reason", "pcpu"}},
        {"route_to_gear2", {"vm", "vcpu", "reason"}},
        {"world_switch", {"pcpu", "from", "to_vm", "to_vcpu"}},
        {"hypercall", {"vm", "vcpu", "id", "ret"}},
        {"virq_inject", {"vm", "vcpu", "line", "slot"}},
        {"virq_delivered", {"vm", "vcpu", "line"}},
        {"gicd_emul", {"vm", "offset", "op"}},
        {"el3_hop", {"pcpu"}},
        {"psci_on", {"pcpu", "ret"}},
        {"mem_share", {"owner", "target", "page", "pages"}},
        {"mem_reclaim", {"owner", "target", "page", "pages"}},
        {"vm_restart", {"vm"}},
        {"gear2_restart", {}},
        {"rtvm_launch", {"vm", "vcpu", "pcpu"}},
        {"boot_info", {"vm", "regions", "pcpus", "devices"}},
        {"guest_fault", {"vm", "vcpu", "addr", "kind"}},
        {"sched_pick", {"pcpu", "thread", "vm", "vcpu"}},
        {"sched_idle", {"pcpu"}},
        {"quantum_expiry", {"pcpu", "thread", "vm", "vcpu"}},
        {"io_request", {"vm", "vcpu", "dev", "tag"}},
        {"io_backpressure", {"vm", "vcpu", "dev"}},
        {"io_ack", {"dev", "tag", "ok"}},
        {"gdm_op", {"dev", "tag", "write", "len"}},
        {"api_forward", {"opcode", "len", "mode"}},
        {"ivc_send", {"src", "dst", "len"}},
        {"watchdog_kick", {"layer", "subject"}},
        {"supervision_event", {"layer", "subject", "action"}},
        {"stall", {"subject"}},
        {"rt_wake_cost", {"vm", "vcpu", "draw"}},
        {"rt_wake", {"vm", "vcpu", "latency", "expected"}},
        {"custom", {"a", "b", "c", "d"}},
    };
    return table[static_cast<size_t>(a)];
}

} // namespace

const char* action_name(Action a) { return info(a).name; }

const char* cause_name(Cause c) {
    switch (c) {
    case Cause::None: return "none";
    case Cause::IrqFwd: return "irqfwd";
    case Cause::Sched: return "sched";
    case Cause::Io: return "io";
    case Cause::Boot: return "boot";
    }
    return "?";
}

std::string canonical_line(const TraceRecord& r) {
    char buf[64];
    std::string line;
    line.reserve(96);
    std::snprintf(buf, sizeof(buf), "%llu", static_cast<unsigned long long>(r.at));
    line += buf;
    line += '\t';
    switch (r.actor.kind) {
    case ActorKind::Gear1: line += "gear1"; break;
    case ActorKind::Gear2: line += "gear2"; break;
    case ActorKind::Dvm: line += "dvm"; break;
    case ActorKind::Machine: line += "machine"; break;
    case ActorKind::Vm:
        std::snprintf(buf, sizeof(buf), "vm:%u:%u", r.actor.vm, r.actor.vcpu);
        line += buf;
        break;
    }
    line += '\t';
    const ActionInfo& ai = info(r.action);
    line += ai.name;
    for (u8 i = 0; i < r.argc && i < 4; ++i) {
        line += ' ';
        line += ai.args[i] ? ai.args[i] : "arg";
        std::snprintf(buf, sizeof(buf), "=%lld", static_cast<long long>(r.arg[i]));
        line += buf;
    }
    if (r.cause != Cause::None) {
        line += " cause=";
        line += cause_name(r.cause);
    }
    line += '\t';
    std::snprintf(buf, sizeof(buf), "%llu", static_cast<unsigned long long>(r.cost));
    line += buf;
    line += '\n';
    return line;
}

void write_canonical(const Trace& trace, std::ostream& os) {
    for (const TraceRecord& r : trace)
        os << canonical_line(r);
}

std::string trace_hash(const Trace& trace) {
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    for (const TraceRecord& r : trace) {
        std::string line = canonical_line(r);
        EVP_DigestUpdate(ctx, line.data(), line.size());
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);

    static const char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xF];
    }
    return out;
}

} // namespace gearsim
