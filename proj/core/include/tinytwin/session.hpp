// SPDX-License-Identifier: Apache-2.0
// One gNB and N UEs in a single process, talking over loopback TCP.
#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "tinytwin/fronthaul.hpp"

namespace tinytwin {

struct LocalUeSpec {
  std::uint32_t ue_id = 0;
  std::shared_ptr<const CirTrace> trace;
  std::vector<unsigned> cores;
};

struct LocalSessionConfig {
  SessionMode mode = SessionMode::optimized;
  std::uint32_t samples_per_slot = 1920;
  std::chrono::nanoseconds slot_duration = std::chrono::milliseconds(1);
  std::size_t sparse_n = 0;
  double noise_power = 0.0;
  double signal_power = 1.0;
  std::uint64_t seed = 1;
  std::uint64_t num_slots = 1000;
  std::vector<LocalUeSpec> ues;
  std::vector<unsigned> gnb_cores;
  /// Apply the default two-cores-per-UE map to UEs without explicit cores.
  bool pinning = false;
  std::chrono::nanoseconds ue_timeout = std::chrono::milliseconds(10);
  std::uint64_t offered_bits_per_slot = 0;
  McsTable mcs_table = McsTable::nr_default();
  TbModel tb{};

  bool capture_aggregate = false;  // keep every uplink aggregate
  bool capture_downlink = false;   // keep every UE's received downlink
  /// Echo probes issued once the run is under way (0 = none).
  std::size_t echo_count = 0;
  std::size_t echo_payload_bytes = 32;
  std::optional<std::uint32_t> echo_ue;  // defaults to the lowest UE id

  /// Custom application endpoints; default is synthetic full-amplitude IQ.
  DownlinkSource downlink_source;
  std::map<std::uint32_t, UeUplinkSource> uplink_sources;
  std::map<std::uint32_t, UeDownlinkSink> downlink_sinks;

  TwinMetrics* metrics = nullptr;
  /// Called with the gNB once slots are running and with nullptr before it
  /// is torn down; lets a caller stop the run from another thread.
  std::function<void(GnbSession*)> gnb_hook;
};

struct LocalSessionResult {
  std::vector<SlotTimingRecord> timing;
  GnbStats gnb;
  std::map<std::uint32_t, UeStats> ue_stats;
  std::map<std::uint32_t, LinkState> links;
  std::vector<std::vector<cf32>> aggregates;                   // [slot][sample]
  std::map<std::uint32_t, std::vector<cf32>> downlink;         // concatenated per UE
  std::vector<std::chrono::nanoseconds> echo_rtts;
};

/// Runs a complete session. Any UE failing its handshake tears the whole
/// session down and rethrows.
LocalSessionResult run_local_session(const LocalSessionConfig& cfg);

}  // namespace tinytwin
