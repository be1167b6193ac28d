/*
 * Copyright (c) 2026 the gearsim authors.
 * SPDX-License-Identifier: Apache-2.0
 */
#include "gearsim/watchdog.hpp"

#include <algorithm>

#include "gearsim/system.hpp"

namespace gearsim {

const char* layer_name(Layer l) {
    switch (l) {
    case Layer::L1RS: return "l1rs";
    case Layer::L2RS: return "l2rs";
    case Layer::L3RS: return "l3rs";
    case Layer::L4RS: return "l4rs";
    }
    return "?";
}

const char* sup_action_name(SupAction a) {
    switch (a) {
    case SupAction::LogOnly: return "log_only";
    case SupAction::RestartVm: return "restart_vm";
    case SupAction::RestartGear2: return "restart_gear2";
    case SupAction::SocReset: return "soc_reset";
    }
    return "?";
}

namespace {

// subjects are encoded into trace arguments: vm ids as-is, gear2 = -2,
// soc = -3
i64 subject_code(const std::string& subject) {
    if (subject == "gear2")
        return -2;
    if (subject == "soc")
        return -3;
    if (subject.rfind("vm:", 0) == 0)
        return std::stoll(subject.substr(3));
    return -1;
}

} // namespace

void Supervision::configure(const SupervisionConfig& cfg) {
    cfg_ = cfg;
    dogs_.clear();
    events_.clear();
    l2_failures_.clear();
}

void Supervision::register_watchdog(Layer layer, const std::string& subject, u64 period_ns,
                                    SupAction action) {
    Watchdog d;
    d.layer = layer;
    d.subject = subject;
    d.period_ns = period_ns;
    d.last_kick = sys_ ? sys_->now() : 0;
    d.action = action;
    dogs_[{static_cast<u8>(layer), subject}] = d;
}

bool Supervision::registered(Layer layer, const std::string& subject) const {
    return dogs_.count({static_cast<u8>(layer), subject}) != 0;
}

bool Supervision::kick(Layer layer, const std::string& subject) {
    auto it = dogs_.find({static_cast<u8>(layer), subject});
    if (it == dogs_.end())
        return false;
    it->second.last_kick = sys_->now();
    sys_->record(Actor::gear2(), Action::WatchdogKick, 0,
                 {static_cast<i64>(layer), subject_code(subject)});
    return true;
}

void Supervision::start() {
    if (!cfg_.enabled)
        return;
    if (cfg_.l1.enabled)
        schedule_check(Layer::L1RS, cfg_.l1.period_ns);
    if (cfg_.l2.enabled)
        schedule_check(Layer::L2RS, cfg_.l2.period_ns);
    if (cfg_.l3.enabled)
        schedule_check(Layer::L3RS, cfg_.l3.period_ns);
    if (cfg_.l4.enabled)
        schedule_check(Layer::L4RS, cfg_.l4.period_ns);
}

void Supervision::schedule_check(Layer layer, u64 period_ns) {
    if (period_ns == 0)
        return;
    sys_->engine.schedule_in(period_ns, EventKind::WatchdogCheck, [this, layer, period_ns] {
        check_layer(layer);
        schedule_check(layer, period_ns);
    });
}

std::vector<SupervisionEvent> Supervision::check_layer(Layer layer) {
    std::vector<SupervisionEvent> out;
    // L1 checks run inside each guest; L2 checks belong to gear2. Both die
    // with their host. L3 (gear1) and L4 (external MCU) keep running.
    if (layer == Layer::L2RS && sys_->gear2.stalled())
        return out;
    for (auto& [key, dog] : dogs_) {
        if (key.first != static_cast<u8>(layer))
            continue;
        if (layer == Layer::L1RS) {
            // guest-local check: a dead guest cannot self-check
            i64 code = subject_code(dog.subject);
            if (code >= 0) {
                VcpuRef v{static_cast<VmId>(code), 0};
                if (sys_->guests.has_guest(v) && sys_->guests.guest(v).stalled)
                    continue;
            }
        }
        if (sys_->now() - dog.last_kick > dog.period_ns) {
            SupervisionEvent ev;
            ev.at = sys_->now();
            ev.layer = layer;
            ev.subject = dog.subject;
            ev.action = dog.action;
            out.push_back(ev);
            dog.last_kick = sys_->now(); // re-arm so a dead subject fires once per period
        }
    }
    for (const SupervisionEvent& ev : out) {
        events_.push_back(ev);
        sys_->record(Actor::gear2(), Action::SupervisionEvent, 0,
                     {static_cast<i64>(ev.layer), subject_code(ev.subject),
                      static_cast<i64>(ev.action)});
        if (ev.layer == Layer::L2RS)
            note_l2_failure(ev.subject);
        apply_action(ev);
    }
    return out;
}

std::vector<SupervisionEvent> Supervision::check_all() {
    std::vector<SupervisionEvent> out;
    for (Layer l : {Layer::L1RS, Layer::L2RS, Layer::L3RS, Layer::L4RS}) {
        auto v = check_layer(l);
        out.insert(out.end(), v.begin(), v.end());
    }
    return out;
}

void Supervision::note_l2_failure(const std::string& subject) {
    auto& hist = l2_failures_[subject];
    hist.push_back(sys_->now());
    SimTime cutoff =
        sys_->now() > cfg_.escalate_window_ns ? sys_->now() - cfg_.escalate_window_ns : 0;
    hist.erase(std::remove_if(hist.begin(), hist.end(),
                              [cutoff](SimTime t) { return t < cutoff; }),
               hist.end());
    if (hist.size() >= cfg_.escalate_threshold) {
        hist.clear();
        // repeated L2 failures escalate one layer up
        SupervisionEvent ev;
        ev.at = sys_->now();
        ev.layer = Layer::L3RS;
        ev.subject = subject;
        ev.action = cfg_.l3.action;
        events_.push_back(ev);
        sys_->record(Actor::gear2(), Action::SupervisionEvent, 0,
                     {static_cast<i64>(ev.layer), subject_code(ev.subject),
                      static_cast<i64>(ev.action)});
        apply_action(ev);
    }
}

void Supervision::apply_action(const SupervisionEvent& ev) {
    switch (ev.action) {
    case SupAction::LogOnly:
        break;
    case SupAction::RestartVm: {
        i64 code = subject_code(ev.subject);
        if (code >= 0)
            sys_->gear1.restart_vm(static_cast<VmId>(code));
        break;
    }
    case SupAction::RestartGear2:
        sys_->record(Actor::gear1(), Action::Gear2Restart, 0, {});
        sys_->gear2.unstall();
        if (auto it = dogs_.find({static_cast<u8>(Layer::L3RS), "gear2"}); it != dogs_.end())
            it->second.last_kick = sys_->now();
        break;
    case SupAction::SocReset:
        break; // L4 only observes; the MCU is outside the SoC
    }
}

} // namespace gearsim
