/*
 * Copyright (c) 2026 the gearsim authors.
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <functional>
#include <map>
#include <utility>

#include "gearsim/prng.hpp"
#include "gearsim/trace.hpp"
#include "gearsim/types.hpp"

namespace gearsim {

enum class EventKind : u8 { IrqRaised, TimerFire, GuestStep, WatchdogCheck, IoComplete, Custom };

using EventId = u64;

/*
 * Deterministic discrete-event engine. Dispatch order is the total
 * lexicographic order on (time, sequence); the sequence number is assigned
 * at scheduling time, so equal-time events run FIFO. One engine per
 * simulation instance, strictly single-threaded.
 */
class Engine {
public:
    explicit Engine(u64 seed = 0) : prng_(seed) {}

    SimTime now() const { return now_; }
    Prng& prng() { return prng_; }

    /// Enqueue fn at time `at`. Throws PastTimeError if at < now().
    EventId schedule(SimTime at, EventKind kind, std::function<void()> fn);

    EventId schedule_in(SimTime delay, EventKind kind, std::function<void()> fn) {
        return schedule(now_ + delay, kind, std::move(fn));
    }

    /// Drop a not-yet-dispatched event. Returns false if already gone.
    bool cancel(EventId id);

    /// Dispatch every event with at <= deadline. now() ends at the time of
    /// the last dispatched event (it is not advanced to the deadline when
    /// the queue drains early).
    const Trace& run_until(SimTime deadline);

    bool empty() const { return queue_.empty(); }
    u64 dispatched() const { return dispatched_; }

    const Trace& trace() const { return trace_; }
    Trace& trace() { return trace_; }

    void record(TraceRecord rec);
    TraceRecord& record(Actor actor, Action action, u64 cost,
                        std::initializer_list<i64> args = {}, Cause cause = Cause::None);

private:
    struct Key {
        SimTime at;
        EventId seq;
        friend auto operator<=>(const Key&, const Key&) = default;
    };
    struct Pending {
        EventKind kind;
        std::function<void()> fn;
    };

    SimTime now_ = 0;
    EventId next_seq_ = 1;
    u64 dispatched_ = 0;
    std::map<Key, Pending> queue_;
    std::map<EventId, SimTime> index_; // id -> at, for cancellation
    Trace trace_;
    Prng prng_;
};

} // namespace gearsim
