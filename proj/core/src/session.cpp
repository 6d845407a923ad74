// SPDX-License-Identifier: Apache-2.0
#include "tinytwin/session.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <future>

#include "tinytwin/pinning.hpp"
#include "tinytwin/rng.hpp"

namespace tinytwin {

LocalSessionResult run_local_session(const LocalSessionConfig& cfg) {
  if (cfg.ues.empty()) throw Error(Errc::InvalidArgument, "session has no UEs");
  LocalSessionResult result;
  std::mutex result_mu;

  auto dl_pool = std::make_shared<IqPool>(derive_seed({cfg.seed, 0x444cu}), cfg.samples_per_slot);
  GnbConfig g;
  g.mode = cfg.mode;
  g.samples_per_slot = cfg.samples_per_slot;
  g.slot_duration = cfg.slot_duration;
  g.sparse_n = cfg.sparse_n;
  g.noise_power = 0.0;
  g.seed = cfg.seed;
  g.ue_timeout = cfg.ue_timeout;
  g.cores = cfg.gnb_cores;
  for (const auto& u : cfg.ues) g.ues.push_back(UeChannel{u.ue_id, u.trace});

  DownlinkSource dl = cfg.downlink_source;
  if (!dl)
    dl = [dl_pool](std::uint64_t s, std::span<cf32> out) {
      const auto f = dl_pool->frame(s);
      std::copy(f.begin(), f.end(), out.begin());
    };
  UplinkSink ul;
  if (cfg.capture_aggregate) {
    result.aggregates.reserve(cfg.num_slots);
    ul = [&](std::uint64_t, std::span<const cf32> agg) { result.aggregates.emplace_back(agg.begin(), agg.end()); };
  }

  auto gnb = run_gnb(std::move(g), std::move(dl), std::move(ul), cfg.metrics);
  auto accepting = std::async(std::launch::async, [&] { gnb->accept_ues(); });

  std::vector<std::unique_ptr<UeSession>> ues;
  try {
    for (std::size_t i = 0; i < cfg.ues.size(); ++i) {
      const auto& ue_cfg = cfg.ues[i];
      UeConfig u;
      u.ue_id = ue_cfg.ue_id;
      u.trace = ue_cfg.trace;
      u.sparse_n = cfg.sparse_n;
      u.noise_power = cfg.noise_power;
      u.signal_power = cfg.signal_power;
      u.seed = cfg.seed;
      u.cores = ue_cfg.cores;
      if (u.cores.empty() && cfg.pinning) {
        u.cores = default_ue_cores(i);
        const auto n = host_core_count();
        std::erase_if(u.cores, [n](unsigned c) { return c >= n; });
      }
      u.port = gnb->port();
      u.mcs_table = cfg.mcs_table;
      u.tb = cfg.tb;
      u.offered_bits_per_slot = cfg.offered_bits_per_slot;

      UeUplinkSource src;
      if (auto it = cfg.uplink_sources.find(ue_cfg.ue_id); it != cfg.uplink_sources.end()) {
        src = it->second;
      } else {
        auto pool = std::make_shared<IqPool>(derive_seed({cfg.seed, 0x554cu, ue_cfg.ue_id}), cfg.samples_per_slot);
        src = [pool](std::uint64_t s, std::span<cf32> out) {
          const auto f = pool->frame(s);
          std::copy(f.begin(), f.end(), out.begin());
        };
      }
      UeDownlinkSink sink;
      auto custom = cfg.downlink_sinks.find(ue_cfg.ue_id);
      if (cfg.capture_downlink) {
        std::vector<cf32>* store = nullptr;
        {
          std::lock_guard lk(result_mu);
          store = &result.downlink[ue_cfg.ue_id];
          store->reserve(cfg.num_slots * cfg.samples_per_slot);
        }
        UeDownlinkSink inner = custom != cfg.downlink_sinks.end() ? custom->second : UeDownlinkSink{};
        sink = [store, inner](std::uint64_t s, std::span<const cf32> rx) {
          store->insert(store->end(), rx.begin(), rx.end());
          if (inner) inner(s, rx);
        };
      } else if (custom != cfg.downlink_sinks.end()) {
        sink = custom->second;
      }
      ues.push_back(run_ue(std::move(u), std::move(sink), std::move(src), cfg.metrics));
    }
    accepting.get();
  } catch (...) {
    spdlog::error("session startup failed; tearing down {} attached UEs", ues.size());
    gnb->stop();
    if (accepting.valid()) {
      try {
        accepting.get();
      } catch (...) {
      }
    }
    ues.clear();
    throw;
  }

  gnb->start(cfg.num_slots);
  struct HookGuard {
    const std::function<void(GnbSession*)>& hook;
    ~HookGuard() {
      if (hook) hook(nullptr);
    }
  } hook_guard{cfg.gnb_hook};
  if (cfg.gnb_hook) cfg.gnb_hook(gnb.get());

  if (cfg.echo_count > 0) {
    const auto target = cfg.echo_ue.value_or(std::min_element(cfg.ues.begin(), cfg.ues.end(), [](auto& a, auto& b) {
                                                return a.ue_id < b.ue_id;
                                              })->ue_id);
    std::vector<std::byte> payload(cfg.echo_payload_bytes, std::byte{0x5a});
    const auto timeout = std::chrono::duration_cast<std::chrono::milliseconds>(
        cfg.slot_duration * 10 + cfg.ue_timeout * 4 + std::chrono::milliseconds(100));
    try {
      result.echo_rtts = gnb->echo_rtt(target, payload, cfg.echo_count, timeout);
    } catch (...) {
      gnb->stop();
      gnb->wait();
      throw;
    }
  }

  gnb->wait();
  std::exception_ptr ue_failure;
  for (auto& u : ues) {
    try {
      u->wait();
    } catch (...) {
      if (!ue_failure) ue_failure = std::current_exception();
    }
    result.ue_stats[u->config().ue_id] = u->stats();
    result.links[u->config().ue_id] = u->link_state();
  }
  result.timing = gnb->timing();
  result.gnb = gnb->stats();
  if (ue_failure) std::rethrow_exception(ue_failure);
  return result;
}

}  // namespace tinytwin
