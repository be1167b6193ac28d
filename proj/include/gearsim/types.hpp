/*
 * Copyright (c) 2026 the gearsim authors.
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace gearsim {

using u8 = std::uint8_t;
using u16 = std::uint16_t;
using u32 = std::uint32_t;
using u64 = std::uint64_t;
using i64 = std::int64_t;

/// Virtual time in nanoseconds. Monotonically non-decreasing across
/// dispatched events; all transition costs are charged against it.
using SimTime = u64;

using VmId = u32;
using VcpuId = u32;
using PcpuId = u32;
using IrqLine = u32;
using Addr = u64;

constexpr u64 kPageShift = 12;
constexpr u64 kPageSize = 1ull << kPageShift; // 4 KiB, fixed

constexpr u64 page_of(Addr a) { return a >> kPageShift; }
constexpr Addr page_addr(u64 page) { return page << kPageShift; }
constexpr bool page_aligned(Addr a) { return (a & (kPageSize - 1)) == 0; }

struct VcpuRef {
    VmId vm = 0;
    VcpuId vcpu = 0;
    friend bool operator==(const VcpuRef&, const VcpuRef&) = default;
    friend auto operator<=>(const VcpuRef&, const VcpuRef&) = default;
};

enum class VmKind : u8 { Primary, Secondary, Dvm, Rtvm };

const char* vm_kind_name(VmKind k);

/// Configuration/manifest rejection reasons. Raised during scenario load or
/// gear1 init; simulation never starts on a bad config.
enum class ConfigErrc {
    ManifestOverlap,
    ManifestUnaligned,
    RtvmAffinityShared,
    ColorMask,
    MmioOverlap,
    Schema,
    UnknownRef,
};

class ConfigError : public std::runtime_error {
public:
    ConfigError(ConfigErrc code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    ConfigErrc code() const { return code_; }

private:
    ConfigErrc code_;
};

/// Scheduling an event in the past is a programming error, not a
/// recoverable condition.
class PastTimeError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

} // namespace gearsim
