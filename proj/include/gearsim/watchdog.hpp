/*
 * Copyright (c) 2026 the gearsim authors.
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <map>
#include <string>
#include <vector>

#include "gearsim/scenario.hpp"
#include "gearsim/types.hpp"

namespace gearsim {

class System;

enum class Layer : u8 { L1RS = 1, L2RS = 2, L3RS = 3, L4RS = 4 };

const char* layer_name(Layer l);
const char* sup_action_name(SupAction a);

struct Watchdog {
    Layer layer = Layer::L2RS;
    std::string subject;
    u64 period_ns = 0;
    SimTime last_kick = 0;
    SupAction action = SupAction::LogOnly;
};

struct SupervisionEvent {
    SimTime at = 0;
    Layer layer = Layer::L2RS;
    std::string subject;
    SupAction action = SupAction::LogOnly;
};

/*
 * Layered reliability supervision: L1 inside each guest, L2 in Gear2 over
 * the guest VMs, L3 in Gear1 over the primary VM, L4 an external observer
 * of the SoC heartbeat. Check events are ordinary engine events; an expired
 * subject emits one SupervisionEvent per check.
 */
class Supervision {
public:
    void attach(System& sys) { sys_ = &sys; }
    void configure(const SupervisionConfig& cfg);

    void register_watchdog(Layer layer, const std::string& subject, u64 period_ns,
                           SupAction action);
    bool registered(Layer layer, const std::string& subject) const;

    /// Records a liveness sign; unknown watchdogs are an error surfaced to
    /// the caller (hypercall path returns HC_ENOTARGET).
    bool kick(Layer layer, const std::string& subject);

    /// One scheduled check per layer period. L2 checks run only while the
    /// primary VM is alive; L3/L4 are independent of it.
    std::vector<SupervisionEvent> check_layer(Layer layer);

    /// Run every layer's check immediately (test hook).
    std::vector<SupervisionEvent> check_all();

    void start(); // schedule the periodic checks
    const std::vector<SupervisionEvent>& events() const { return events_; }
    const SupervisionConfig& config() const { return cfg_; }

private:
    void schedule_check(Layer layer, u64 period_ns);
    void apply_action(const SupervisionEvent& ev);
    void note_l2_failure(const std::string& subject);

    System* sys_ = nullptr;
    SupervisionConfig cfg_;
    std::map<std::pair<u8, std::string>, Watchdog> dogs_;
    std::vector<SupervisionEvent> events_;
    std::map<std::string, std::vector<SimTime>> l2_failures_;
};

} // namespace gearsim
