/*
 * Copyright (c) 2026 the gearsim authors.
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "gearsim/types.hpp"

namespace gearsim {

enum class ActorKind : u8 { Gear1, Gear2, Vm, Dvm, Machine };

struct Actor {
    ActorKind kind = ActorKind::Machine;
    VmId vm = 0;
    VcpuId vcpu = 0;

    static Actor gear1() { return {ActorKind::Gear1}; }
    static Actor gear2() { return {ActorKind::Gear2}; }
    static Actor dvm() { return {ActorKind::Dvm}; }
    static Actor machine() { return {ActorKind::Machine}; }
    static Actor guest(VmId v, VcpuId c) { return {ActorKind::Vm, v, c}; }
    static Actor guest(VcpuRef r) { return {ActorKind::Vm, r.vm, r.vcpu}; }

    friend bool operator==(const Actor&, const Actor&) = default;
};

/// Action tags. The canonical serialization (docs/trace-format.md) renders
/// the tag plus its named arguments; changing names or order changes every
/// trace hash, so the table in trace.cpp is append-only.
enum class Action : u8 {
    IrqRaised,
    IrqPending,
    IrqDirect,
    TimerFire,
    SgiFiltered,
    VmTrap,
    RouteToGear2,
    WorldSwitch,
    Hypercall,
    VirqInject,
    VirqDelivered,
    GicdEmul,
    El3Hop,
    PsciOn,
    MemShare,
    MemReclaim,
    VmRestart,
    Gear2Restart,
    RtvmLaunch,
    BootInfo,
    GuestFault,
    SchedPick,
    SchedIdle,
    QuantumExpiry,
    IoRequest,
    IoBackpressure,
    IoAck,
    GdmOp,
    ApiForward,
    IvcSend,
    WatchdogKick,
    SupervisionEvent,
    Stall,
    RtWakeCost,
    RtWake,
    Custom,
};

enum class Cause : u8 { None = 0, IrqFwd, Sched, Io, Boot };

struct TraceRecord {
    SimTime at = 0;
    Actor actor;
    Action action = Action::Custom;
    u64 cost = 0; // nanoseconds charged by this action
    std::array<i64, 4> arg{};
    u8 argc = 0;
    Cause cause = Cause::None;
};

using Trace = std::vector<TraceRecord>;

const char* action_name(Action a);
const char* cause_name(Cause c);

/// One record per line, fields tab-separated in declared order
/// (at, actor, action, cost), integers decimal, no locale formatting.
/// This byte format is the input to trace_hash and is bit-exact.
void write_canonical(const Trace& trace, std::ostream& os);
std::string canonical_line(const TraceRecord& r);

/// SHA-256 over the canonical serialization, lowercase hex. The empty trace
/// hashes to the SHA-256 of zero bytes:
/// e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855
std::string trace_hash(const Trace& trace);

} // namespace gearsim
