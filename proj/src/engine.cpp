/*
 * Copyright (c) 2026 the gearsim authors.
 * SPDX-License-Identifier: Apache-2.0
 */
#include "gearsim/engine.hpp"

namespace gearsim {

EventId Engine::schedule(SimTime at, EventKind kind, std::function<void()> fn) {
    if (at < now_)
        throw PastTimeError("schedule: event time is in the past");
    EventId id = next_seq_++;
    queue_.emplace(Key{at, id}, Pending{kind, std::move(fn)});
    index_.emplace(id, at);
    return id;
}

bool Engine::cancel(EventId id) {
    auto it = index_.find(id);
    if (it == index_.end())
        return false;
    queue_.erase(Key{it->second, id});
    index_.erase(it);
    return true;
}

const Trace& Engine::run_until(SimTime deadline) {
    while (!queue_.empty()) {
        auto it = queue_.begin();
        if (it->first.at > deadline)
            break;
        now_ = it->first.at;
        // move the handler out before dispatch; it may schedule or cancel
        std::function<void()> fn = std::move(it->second.fn);
        index_.erase(it->first.seq);
        queue_.erase(it);
        ++dispatched_;
        fn();
    }
    return trace_;
}

void Engine::record(TraceRecord rec) {
    trace_.push_back(rec);
}

TraceRecord& Engine::record(Actor actor, Action action, u64 cost,
                            std::initializer_list<i64> args, Cause cause) {
    TraceRecord rec;
    rec.at = now_;
    rec.actor = actor;
    rec.action = action;
    rec.cost = cost;
    rec.cause = cause;
    for (i64 a : args) {
        if (rec.argc >= 4)
            break;
        rec.arg[rec.argc++] = a;
    }
    trace_.push_back(rec);
    return trace_.back();
}

} // namespace gearsim
