// SPDX-License-Identifier: Apache-2.0
#include "tinytwin/pinning.hpp"

#include <pthread.h>
#include <sched.h>

#include <cstring>

#include <spdlog/spdlog.h>

#include "tinytwin/error.hpp"

namespace tinytwin {

unsigned host_core_count() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

namespace {

bool apply(pthread_t handle, std::span<const unsigned> cores) {
  if (cores.empty()) return true;
  const unsigned n = host_core_count();
  cpu_set_t set;
  CPU_ZERO(&set);
  for (unsigned c : cores) {
    if (c >= n || c >= CPU_SETSIZE)
      throw Error(Errc::InvalidCore, "core " + std::to_string(c) + " not present (host has " + std::to_string(n) + ")");
    CPU_SET(c, &set);
  }
  const int rc = pthread_setaffinity_np(handle, sizeof(set), &set);
  if (rc != 0) {
    spdlog::warn("CPU pinning unavailable ({}); using scheduler placement", std::strerror(rc));
    return false;
  }
  return true;
}

}  // namespace

bool pin_current_thread(std::span<const unsigned> cores) { return apply(pthread_self(), cores); }

bool pin_thread(std::thread& worker, std::span<const unsigned> cores) { return apply(worker.native_handle(), cores); }

std::vector<unsigned> current_thread_affinity() {
  cpu_set_t set;
  CPU_ZERO(&set);
  std::vector<unsigned> out;
  if (pthread_getaffinity_np(pthread_self(), sizeof(set), &set) != 0) return out;
  for (unsigned c = 0; c < CPU_SETSIZE; ++c)
    if (CPU_ISSET(c, &set)) out.push_back(c);
  return out;
}

std::vector<unsigned> default_ue_cores(std::size_t ue_index) {
  const unsigned n = host_core_count();
  if (n <= 2) return {0u % n, 1u % n};
  const unsigned usable = n - 1;
  const auto first = static_cast<unsigned>(1 + (2 * ue_index) % usable);
  const auto second = static_cast<unsigned>(1 + (2 * ue_index + 1) % usable);
  return {first, second};
}

}  // namespace tinytwin
