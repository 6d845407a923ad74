// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <thread>
#include <vector>

namespace tinytwin {

unsigned host_core_count();

/// Binds the calling thread to `cores`. An empty set leaves scheduler-default
/// placement. Throws InvalidCore for ids >= host_core_count(); returns false
/// (after logging a warning) if the host refuses the affinity request.
bool pin_current_thread(std::span<const unsigned> cores);
bool pin_thread(std::thread& worker, std::span<const unsigned> cores);

/// Cores the calling thread may currently run on.
std::vector<unsigned> current_thread_affinity();

/// worker (UE id) -> cores
using PinningMap = std::map<std::uint32_t, std::vector<unsigned>>;

/// Two cores per UE worker group, skipping core 0 (left to the gNB) when the
/// host has spare cores; wraps around on small hosts.
std::vector<unsigned> default_ue_cores(std::size_t ue_index);

}  // namespace tinytwin
