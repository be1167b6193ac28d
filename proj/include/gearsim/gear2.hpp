/*
 * Copyright (c) 2026 the gearsim authors.
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <deque>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "gearsim/gear1.hpp"
#include "gearsim/types.hpp"

namespace gearsim {

class System;
class Gear2;

enum class ThreadKind : u8 { Idle, Vcpu, Service };
enum class ThreadState : u8 { Ready, Running, Blocked };

using ThreadId = u32; // 0 is reserved for "none"

struct Thread {
    ThreadId id = 0;
    ThreadKind kind = ThreadKind::Idle;
    VcpuRef vcpu{};
    ThreadState state = ThreadState::Ready;
    BlockReason block = BlockReason::None;
    PcpuId pcpu = 0;
    i64 priority = 0;
    u64 quanta = 0;        // full quantum slices consumed
    u64 slice_gen = 0;     // invalidates stale preemption events
    bool slice_expired = false;
    bool fresh_slice = true; // next guest entry starts a new quantum
    SimTime slice_end = 0;
    Cause wake_cause = Cause::None;
};

/*
 * Pluggable per-pcpu scheduling policy. pick_next pops the next thread id
 * from the queue (or 0 for idle); on_ready/on_block maintain the queue.
 */
class SchedulerPolicy {
public:
    virtual ~SchedulerPolicy() = default;
    virtual const char* name() const = 0;
    virtual ThreadId pick_next(Gear2& g2, std::deque<ThreadId>& queue) = 0;
    virtual void on_ready(Gear2& g2, std::deque<ThreadId>& queue, ThreadId t) = 0;
    virtual void on_block(Gear2& g2, std::deque<ThreadId>& queue, ThreadId t) = 0;
};

/// Default policy: head of queue runs for at most one quantum, preempted
/// threads go to the tail.
class RoundRobinPolicy : public SchedulerPolicy {
public:
    const char* name() const override { return "round_robin"; }
    ThreadId pick_next(Gear2&, std::deque<ThreadId>& queue) override;
    void on_ready(Gear2&, std::deque<ThreadId>& queue, ThreadId t) override;
    void on_block(Gear2&, std::deque<ThreadId>& queue, ThreadId t) override;
};

struct VmExitMessage {
    VcpuRef source{};
    ExitReason reason{};
};

struct DvmRequest {
    u64 tag = 0;
    VcpuRef source{};
    u32 dev_index = 0;
    bool write = false;
    Addr offset = 0;
    u32 size = 0;
    u64 value = 0;
    bool blocking = true;
};

/*
 * The scheduling-policy component running inside the primary VM: per-pcpu
 * run queues with idle threads, vcpu threads driven by RunVcpu, VM-exit
 * dispatch and the request ring toward the device-model VM.
 */
class Gear2 {
public:
    void attach(System& sys) { sys_ = &sys; }

    /// One-time bring-up on pcpu 0 after gear1 transferred control: builds
    /// threads from manifests, powers the secondary pcpus via PSCI and kicks
    /// every vcpu thread on its affine pcpu.
    void boot();

    void register_policy(std::unique_ptr<SchedulerPolicy> policy, PcpuId p);
    SchedulerPolicy& policy(PcpuId p);

    Thread& thread(ThreadId t) { return threads_.at(t); }
    ThreadId thread_of(VcpuRef v) const;
    const std::deque<ThreadId>& queue(PcpuId p) const { return queues_.at(p); }
    ThreadId current(PcpuId p) const { return current_.at(p); }

    /// Scheduling entry point for pcpu p (in the primary world): resumes the
    /// current thread if its slice is still live, otherwise rotates.
    void schedule_pcpu(PcpuId p);

    /// VM exit delivered by gear1 routing.
    void on_vm_exit(PcpuId p, VmExitMessage msg);

    /// Physical interrupt delivered directly to the primary world.
    void on_phys_irq(PcpuId p, IrqLine line);

    void on_ready(VcpuRef v, Cause cause);
    void on_io_ack(u64 tag, bool ok, u64 value);

    /// Slice bookkeeping hook, called by gear1 when a vcpu world is entered.
    void on_guest_entered(PcpuId p, VcpuRef v);
    void on_vm_restarted(VmId vm);

    void quantum_tick(PcpuId p, ThreadId t, u64 slice_gen);

    bool stalled() const { return stalled_; }
    void stall();   // induced failure: the whole primary VM halts
    void unstall(); // restart action from supervision

    // counters for the exactness invariants
    u64 mmio_requests() const { return mmio_requests_; }
    u64 mmio_acks() const { return mmio_acks_; }
    u64 ip_advances() const { return ip_advances_; }
    u64 quantum_expiries() const { return quantum_expiries_; }

    u64 next_io_tag() { return ++io_tag_; }

private:
    void create_threads();
    void run_current(PcpuId p, Cause cause);
    void rotate(PcpuId p);
    void dispatch_irq(PcpuId p, IrqLine line);
    void push_mmio_request(PcpuId p, VcpuRef src, ExitReason r);
    void retry_submit(DvmRequest req);
    void start_services();
    void start_services_beat(u64 period);

    System* sys_ = nullptr;
    std::vector<Thread> threads_; // index 0 unused
    std::map<VcpuRef, ThreadId> by_vcpu_;
    std::map<PcpuId, std::deque<ThreadId>> queues_;
    std::map<PcpuId, ThreadId> current_;
    std::map<PcpuId, std::unique_ptr<SchedulerPolicy>> policies_;
    std::map<u64, DvmRequest> inflight_; // tag -> request
    bool stalled_ = false;
    u64 io_tag_ = 0;
    u64 mmio_requests_ = 0;
    u64 mmio_acks_ = 0;
    u64 ip_advances_ = 0;
    u64 quantum_expiries_ = 0;
};

} // namespace gearsim
