/*
 * Copyright (c) 2026 the gearsim authors.
 * SPDX-License-Identifier: Apache-2.0
 */
#include "gearsim/gdm.hpp"

#include <fstream>

#include "gearsim/system.hpp"

namespace gearsim {

// ----------------------------------------------------------- backing store

void BackingStore::load(const std::string& path, u64 min_size) {
    image_path = path;
    image.assign(min_size, 0);
    if (path.empty())
        return;
    std::ifstream f(path, std::ios::binary);
    if (!f)
        return; // fresh image
    f.seekg(0, std::ios::end);
    std::streamoff len = f.tellg();
    f.seekg(0);
    if (len > 0) {
        if (static_cast<u64>(len) > image.size())
            image.resize(static_cast<u64>(len));
        f.read(reinterpret_cast<char*>(image.data()), len);
    }
}

void BackingStore::flush() const {
    if (image_path.empty())
        return;
    std::ofstream f(image_path, std::ios::binary | std::ios::trunc);
    f.write(reinterpret_cast<const char*>(image.data()),
            static_cast<std::streamsize>(image.size()));
}

// ------------------------------------------------------------- api channel

ApiResponse ApiForwardChannel::forward(u32 opcode, const std::vector<u8>& payload) {
    if (!open)
        throw std::runtime_error("api channel closed");
    ApiResponse r;
    // FNV-1a echo of the command bytes
    u64 h = 1469598103934665603ull;
    for (u8 b : payload) {
        h ^= b;
        h *= 1099511628211ull;
    }
    h ^= opcode;
    h *= 1099511628211ull;
    r.digest = h;
    r.cost_ns = per_cmd_fixed_ns;
    if (mode == IvcMode::CopyIvc)
        r.cost_ns += per_byte_copy_ns * payload.size();
    ++commands_;
    log_.push_back({opcode, payload.size(), r.digest});
    return r;
}

// -------------------------------------------------------------------- gdm

void Gdm::configure(u32 devices, u32 ring_depth, bool kernel_module) {
    queues_.clear();
    for (u32 i = 0; i < devices; ++i) {
        VirtioQueue q;
        q.depth = ring_depth;
        q.completion_line = kVirtioComplBase + i;
        queues_[i] = q;
    }
    kernel_module_ = kernel_module;
    requests_ = acks_ = bad_requests_ = 0;
    seen_tags_.clear();
    duplicate_consumes_ = 0;
}

bool Gdm::submit(const DvmRequest& req) {
    auto it = queues_.find(req.dev_index);
    if (it == queues_.end())
        return false;
    VirtioQueue& q = it->second;
    if (q.full())
        return false;
    q.ring.push_back(req);
    ++q.avail_idx;
    ++requests_;
    return true;
}

u64 Gdm::completion_virqs() const {
    u64 n = 0;
    for (const auto& [idx, q] : queues_)
        n += q.completion_virqs;
    return n;
}

u64 Gdm::backend_execute(DvmRequest& req, bool& ok) {
    ok = true;
    const DeviceState* dev = sys_->machine.device_by_index(req.dev_index);
    if (!dev || req.size == 0 || req.size > 8 || req.offset < 64 ||
        req.offset + req.size > dev->cfg.mmio_len) {
        ok = false;
        ++bad_requests_;
        return static_cast<u64>(-1);
    }
    u64 idx = req.offset - 64;
    switch (dev->cfg.behavior) {
    case DeviceKind::Block: {
        auto& img = store_.image;
        if (idx + req.size > img.size())
            img.resize(idx + req.size, 0);
        if (req.write) {
            for (u32 i = 0; i < req.size; ++i)
                img[idx + i] = static_cast<u8>(req.value >> (8 * i));
            return 0;
        }
        u64 v = 0;
        for (u32 i = 0; i < req.size; ++i)
            v |= static_cast<u64>(img[idx + i]) << (8 * i);
        return v;
    }
    case DeviceKind::Console:
        if (req.write)
            for (u32 i = 0; i < req.size; ++i)
                store_.console_log.push_back(static_cast<char>(req.value >> (8 * i)));
        return 0;
    case DeviceKind::Net:
        if (req.write) {
            for (u32 i = 0; i < req.size; ++i)
                store_.net_loopback.push_back(static_cast<u8>(req.value >> (8 * i)));
            return 0;
        } else {
            u64 v = 0;
            for (u32 i = 0; i < req.size && !store_.net_loopback.empty(); ++i) {
                v |= static_cast<u64>(store_.net_loopback.front()) << (8 * i);
                store_.net_loopback.pop_front();
            }
            return v;
        }
    case DeviceKind::Custom:
        return 0;
    }
    return 0;
}

void Gdm::handle_io_events(VcpuRef dvm_vcpu, std::function<void()> done) {
    // pick the first queued request across devices, lowest index first
    VirtioQueue* q = nullptr;
    for (auto& [idx, queue] : queues_) {
        if (!queue.ring.empty()) {
            q = &queue;
            break;
        }
    }
    if (!q) {
        done();
        return;
    }
    DvmRequest req = q->ring.front();
    q->ring.pop_front();
    if (!seen_tags_.insert(req.tag).second)
        ++duplicate_consumes_; // must stay zero: no descriptor consumed twice

    const CostModel& cm = sys_->costs;
    u64 svc = kernel_module_ ? 0 : cm.gdm_user_hop_ns; // user-space hop
    bool ok = false;
    u64 value = backend_execute(req, ok);
    sys_->record(Actor::dvm(), Action::GdmOp, svc,
                 {req.dev_index, static_cast<i64>(req.tag), req.write ? 1 : 0, req.size});

    u64 tag = req.tag;
    u32 dev = req.dev_index;
    VcpuRef source = req.source;
    Engine& eng = sys_->engine;
    // ack hypercall toward gear2 after the service hop
    eng.schedule_in(svc, EventKind::IoComplete, [this, dvm_vcpu, tag, dev, source, ok, value,
                                                 done]() {
        const CostModel& cm2 = sys_->costs;
        sys_->record(Actor::dvm(), Action::Hypercall, cm2.hypercall_ns,
                     {dvm_vcpu.vm, dvm_vcpu.vcpu, static_cast<i64>(HypercallId::IvcSend),
                      ok ? 0 : HC_EINVAL});
        sys_->engine.schedule_in(cm2.hypercall_ns, EventKind::IoComplete,
                                 [this, dvm_vcpu, tag, dev, source, ok, value, done]() {
            ++acks_;
            sys_->gear2.on_io_ack(tag, ok, value);
            // virtio flow: completion virq back to the source VM
            const CostModel& cm3 = sys_->costs;
            VirtioQueue& queue = queues_.at(dev);
            ++queue.used_idx;
            ++queue.completion_virqs;
            sys_->record(Actor::dvm(), Action::Hypercall, cm3.hypercall_ns,
                         {source.vm, source.vcpu,
                          static_cast<i64>(HypercallId::VirqInject),
                          static_cast<i64>(queue.completion_line)});
            sys_->gear1.virq_inject(source, queue.completion_line, true, cm3.hypercall_ns);
            u64 next_dt = cm3.hypercall_ns + cm3.virq_inject_ns;
            sys_->engine.schedule_in(next_dt, EventKind::IoComplete,
                                     [this, dvm_vcpu, done]() {
                                         handle_io_events(dvm_vcpu, done);
                                     });
        });
    });
}

} // namespace gearsim
