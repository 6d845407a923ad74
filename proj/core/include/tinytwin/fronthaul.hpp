// SPDX-License-Identifier: Apache-2.0
//
// The virtual RF plane. A gNB server exchanges one IQ frame per UE per slot
// with UE clients over TCP:
//
//   slot s:  gNB --IQ_DL(s)--> every UE      (raw downlink)
//            UE convolves downlink with its trace step s mod T
//            UE --IQ_UL(s)--> gNB            (convolved in optimized mode,
//                                             raw in vanilla mode)
//            gNB convolves raw uplinks serially (vanilla) and sums them.
//
// The gNB is the slot clock master: TIME_SYNC carries the epoch and slot
// duration, and UEs are slaved to the IQ_DL stream.
#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "tinytwin/chan_model.hpp"
#include "tinytwin/conv_engine.hpp"
#include "tinytwin/link.hpp"
#include "tinytwin/metrics.hpp"
#include "tinytwin/wire.hpp"

namespace tinytwin {

using Clock = std::chrono::steady_clock;
using namespace std::chrono_literals;

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};
/// Parses "host:port" (empty host = any); throws InvalidArgument.
Endpoint parse_endpoint(const std::string& text);

struct SlotTimingRecord {
  std::uint64_t slot_index = 0;
  std::chrono::nanoseconds compute{0};
  std::chrono::nanoseconds deadline{0};
  bool overrun = false;
};

/// Maps slot indices to wall-clock start times. Slots never move backward.
class SlotClock {
 public:
  SlotClock() = default;
  SlotClock(Clock::time_point epoch, std::chrono::nanoseconds slot_duration)
      : epoch_(epoch), slot_duration_(slot_duration) {}

  Clock::time_point epoch() const { return epoch_; }
  std::chrono::nanoseconds slot_duration() const { return slot_duration_; }
  std::uint64_t current_slot() const { return current_; }
  Clock::time_point slot_start(std::uint64_t s) const { return epoch_ + slot_duration_ * static_cast<std::int64_t>(s); }
  /// First slot whose scheduled start is at or after `t`.
  std::uint64_t first_slot_at_or_after(Clock::time_point t) const;
  void advance() { ++current_; }

 private:
  Clock::time_point epoch_{};
  std::chrono::nanoseconds slot_duration_{1ms};
  std::uint64_t current_ = 0;
};

using DownlinkSource = std::function<void(std::uint64_t slot, std::span<cf32> out)>;
using UplinkSink = std::function<void(std::uint64_t slot, std::span<const cf32> aggregate)>;
using UeDownlinkSink = std::function<void(std::uint64_t slot, std::span<const cf32> received)>;
using UeUplinkSource = std::function<void(std::uint64_t slot, std::span<cf32> out)>;

struct UeChannel {
  std::uint32_t ue_id = 0;
  /// Required in vanilla mode, where the gNB convolves the uplink.
  std::shared_ptr<const CirTrace> trace;
};

struct GnbConfig {
  SessionMode mode = SessionMode::optimized;
  std::uint32_t samples_per_slot = 1920;
  std::chrono::nanoseconds slot_duration = 1ms;
  std::size_t sparse_n = 0;  // 0 = dense
  double noise_power = 0.0;  // receiver noise on the uplink aggregate
  std::uint64_t seed = 1;
  std::vector<UeChannel> ues;
  std::chrono::nanoseconds ue_timeout = 10ms;
  std::vector<unsigned> cores;  // slot thread pinning
  std::uint8_t echo_delay_slots = 2;
  std::string listen_host = "127.0.0.1";
  std::uint16_t listen_port = 0;
  std::chrono::milliseconds handshake_timeout = 10s;
  /// Lead time between start() and slot 0.
  std::chrono::milliseconds start_lead = 20ms;
};

struct GnbStats {
  std::uint64_t slots = 0;
  std::uint64_t ue_timeouts = 0;
  std::uint64_t overruns = 0;
  std::uint64_t disconnects = 0;
};

class GnbSession {
 public:
  /// Binds the listening socket; throws BindFailure.
  GnbSession(GnbConfig cfg, DownlinkSource downlink, UplinkSink uplink, TwinMetrics* metrics = nullptr);
  ~GnbSession();
  GnbSession(const GnbSession&) = delete;
  GnbSession& operator=(const GnbSession&) = delete;

  std::uint16_t port() const;
  const GnbConfig& config() const { return cfg_; }

  /// Completes HELLO/HELLO_ACK with every configured UE. Unknown or duplicate
  /// ids are answered with BYE. Throws SessionFailure on timeout.
  void accept_ues();
  /// Sends TIME_SYNC and runs `num_slots` slots on a worker thread.
  void start(std::uint64_t num_slots);
  /// Joins the slot thread; rethrows its failure.
  void wait();
  /// Ends the run early; BYE goes out to every UE.
  void stop();
  bool running() const { return running_.load(); }

  /// Sends `count` ECHO_REQ probes to `ue_id` one after another and returns
  /// their round-trip times. Each probe rides the downlink of the first slot
  /// scheduled after injection and returns `echo_delay_slots` later, so an
  /// RTT is never below that many slot durations. Throws EchoTimeout.
  std::vector<std::chrono::nanoseconds> echo_rtt(std::uint32_t ue_id, std::span<const std::byte> payload,
                                                 std::size_t count, std::chrono::milliseconds timeout = 1s);

  std::vector<SlotTimingRecord> timing() const;
  GnbStats stats() const;

 private:
  struct UeLink;
  struct EchoProbeState;

  void slot_loop(std::uint64_t num_slots);
  void reader_loop(UeLink& ue);
  void broadcast_bye();

  GnbConfig cfg_;
  DownlinkSource downlink_;
  UplinkSink uplink_;
  TwinMetrics* metrics_;

  struct ListenerHolder;
  std::unique_ptr<ListenerHolder> listener_;
  std::vector<std::unique_ptr<UeLink>> ues_;  // ascending ue_id

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::uint64_t collecting_slot_ = 0;
  std::uint64_t next_send_slot_ = 0;
  SlotClock clock_;
  bool clock_started_ = false;
  std::uint64_t next_probe_id_ = 1;
  std::vector<std::shared_ptr<EchoProbeState>> probes_;

  std::vector<SlotTimingRecord> timing_;
  GnbStats stats_;
  std::thread slot_thread_;
  std::exception_ptr failure_;
  std::atomic<bool> running_{false};
  std::atomic<bool> stop_requested_{false};
};

/// Binds a gNB endpoint and returns its session handle.
std::unique_ptr<GnbSession> run_gnb(GnbConfig cfg, DownlinkSource downlink, UplinkSink uplink,
                                    TwinMetrics* metrics = nullptr);

struct UeConfig {
  std::uint32_t ue_id = 0;
  std::shared_ptr<const CirTrace> trace;
  std::size_t sparse_n = 0;
  double noise_power = 0.0;  // receiver noise on the downlink
  double signal_power = 1.0;
  std::uint64_t seed = 1;
  std::vector<unsigned> cores;
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  std::chrono::milliseconds connect_timeout = 5s;
  /// Link model inputs; the model runs when noise_power > 0.
  McsTable mcs_table = McsTable::nr_default();
  TbModel tb{};
  std::uint64_t offered_bits_per_slot = 0;
};

struct UeStats {
  std::uint64_t frames = 0;
  std::uint64_t last_slot = 0;
  std::uint64_t out_of_order = 0;
  std::uint64_t echoes = 0;
  SessionMode mode = SessionMode::optimized;
};

class UeSession {
 public:
  /// Connects and completes the handshake synchronously; throws
  /// ConnectionLost or HandshakeRejected.
  UeSession(UeConfig cfg, UeDownlinkSink downlink, UeUplinkSource uplink, TwinMetrics* metrics = nullptr);
  ~UeSession();
  UeSession(const UeSession&) = delete;
  UeSession& operator=(const UeSession&) = delete;

  /// Blocks until the gNB says BYE; rethrows ConnectionLost if the link died.
  void wait();
  void stop();

  UeStats stats() const;
  LinkState link_state() const;
  const UeConfig& config() const { return cfg_; }

 private:
  struct Impl;
  void worker();

  UeConfig cfg_;
  UeDownlinkSink downlink_;
  UeUplinkSource uplink_;
  TwinMetrics* metrics_;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
  std::exception_ptr failure_;
  mutable std::mutex mu_;
  UeStats stats_;
  LinkState link_;
};

std::unique_ptr<UeSession> run_ue(UeConfig cfg, UeDownlinkSink downlink, UeUplinkSource uplink,
                                  TwinMetrics* metrics = nullptr);

/// Deterministic constant-modulus pseudo-random IQ: frame `index` of a pool
/// derived from `seed`. Used as synthetic full-amplitude load.
class IqPool {
 public:
  IqPool(std::uint64_t seed, std::uint32_t samples_per_slot, std::size_t frames = 16);
  std::span<const cf32> frame(std::uint64_t index) const;

 private:
  std::uint32_t samples_per_slot_;
  std::vector<std::vector<cf32>> frames_;
};

}  // namespace tinytwin
