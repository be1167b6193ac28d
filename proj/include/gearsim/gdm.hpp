/*
 * Copyright (c) 2026 the gearsim authors.
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <deque>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "gearsim/gear2.hpp"
#include "gearsim/types.hpp"

namespace gearsim {

class System;

/*
 * One request/completion ring per device. avail_idx counts submissions,
 * used_idx completions; the ring is bounded and never overwritten before
 * consumption.
 */
struct VirtioQueue {
    u32 depth = 64;
    std::deque<DvmRequest> ring;
    u64 avail_idx = 0;
    u64 used_idx = 0;
    IrqLine completion_line = 0;
    u64 completion_virqs = 0;

    bool full() const { return ring.size() >= depth; }
};

struct BackingStore {
    std::vector<u8> image; // block device bytes
    std::string image_path;
    std::string console_log;
    std::deque<u8> net_loopback;

    void load(const std::string& path, u64 min_size);
    void flush() const;
};

enum class IvcMode : u8 { CopyIvc, SharedMemIvc };

struct ApiResponse {
    u64 digest = 0; // payload echo: FNV-1a of the command bytes
    u64 cost_ns = 0;
};

/*
 * API-forwarding channel between a guest wrapper library and the GDM.
 * Copy mode charges per byte; shared-memory mode only the fixed cost.
 */
class ApiForwardChannel {
public:
    IvcMode mode = IvcMode::CopyIvc;
    u64 per_cmd_fixed_ns = 5000;
    u64 per_byte_copy_ns = 1;
    bool open = true;

    ApiResponse forward(u32 opcode, const std::vector<u8>& payload);
    u64 commands() const { return commands_; }

    struct LogEntry {
        u32 opcode;
        u64 len;
        u64 digest;
    };
    const std::vector<LogEntry>& log() const { return log_; }

private:
    u64 commands_ = 0;
    std::vector<LogEntry> log_;
};

/*
 * The user-space device model inside the DVM: virtio-style backends that
 * complete trapped MMIO against the backing store, plus the API-forwarding
 * channel.
 */
class Gdm {
public:
    void attach(System& sys) { sys_ = &sys; }
    void configure(u32 devices, u32 ring_depth, bool kernel_module);

    VirtioQueue& queue(u32 dev_index) { return queues_.at(dev_index); }
    BackingStore& store() { return store_; }
    ApiForwardChannel& api_channel() { return api_; }

    /// Push from Gear2; returns false when the ring is full (backpressure).
    bool submit(const DvmRequest& req);

    /// Drain every queued request: executes the backend op, acks Gear2 via
    /// IvcSend and injects the completion virq toward the source VM.
    /// Runs on the DVM vcpu chain; `done` continues the guest afterwards.
    void handle_io_events(VcpuRef dvm_vcpu, std::function<void()> done);

    u64 requests() const { return requests_; }
    u64 acks() const { return acks_; }
    u64 completion_virqs() const;
    u64 bad_requests() const { return bad_requests_; }
    u64 duplicate_consumes() const { return duplicate_consumes_; }

private:
    u64 backend_execute(DvmRequest& req, bool& ok);

    System* sys_ = nullptr;
    std::map<u32, VirtioQueue> queues_;
    BackingStore store_;
    ApiForwardChannel api_;
    bool kernel_module_ = false;
    u64 requests_ = 0;
    u64 acks_ = 0;
    u64 bad_requests_ = 0;
    u64 duplicate_consumes_ = 0;
    std::set<u64> seen_tags_; // double-consumption guard
};

} // namespace gearsim
