// SPDX-License-Identifier: Apache-2.0
#include <spdlog/spdlog.h>

#include <cmath>
#include <deque>
#include <numbers>

#include "socket.hpp"
#include "tinytwin/fronthaul.hpp"
#include "tinytwin/pinning.hpp"
#include "tinytwin/rng.hpp"

namespace tinytwin {

struct UeSession::Impl {
  net::Socket sock;
  std::atomic<bool> stopping{false};
};

UeSession::UeSession(UeConfig cfg, UeDownlinkSink downlink, UeUplinkSource uplink, TwinMetrics* metrics)
    : cfg_(std::move(cfg)),
      downlink_(std::move(downlink)),
      uplink_(std::move(uplink)),
      metrics_(metrics),
      impl_(std::make_unique<Impl>()) {
  if (!cfg_.trace) throw Error(Errc::InvalidArgument, "UE " + std::to_string(cfg_.ue_id) + " has no trace");
  cfg_.trace->validate();
  if (cfg_.noise_power < 0 || !std::isfinite(cfg_.noise_power))
    throw Error(Errc::InvalidArgument, "noise_power must be finite and >= 0");
  link_.ue_id = cfg_.ue_id;

  impl_->sock = net::Socket::connect(cfg_.host, cfg_.port, cfg_.connect_timeout);
  if (!impl_->sock.send_message(WireMessage{MsgType::hello, cfg_.ue_id, 0, {}}))
    throw Error(Errc::ConnectionLost, "gNB closed the connection during HELLO");
  if (!impl_->sock.wait_readable(cfg_.connect_timeout))
    throw Error(Errc::ConnectionLost, "no HELLO_ACK from gNB");
  const auto reply = impl_->sock.recv_message();
  if (reply.type == MsgType::bye)
    throw Error(Errc::HandshakeRejected, "gNB rejected UE " + std::to_string(cfg_.ue_id));
  if (reply.type != MsgType::hello_ack || reply.ue_id != cfg_.ue_id)
    throw Error(Errc::HandshakeRejected, "unexpected handshake reply");
  spdlog::info("ue {}: attached to {}:{}", cfg_.ue_id, cfg_.host, cfg_.port);
  thread_ = std::thread([this] {
    try {
      worker();
    } catch (const Error& e) {
      if (!(impl_->stopping && e.code() == Errc::ConnectionLost)) failure_ = std::current_exception();
    } catch (...) {
      failure_ = std::current_exception();
    }
  });
}

UeSession::~UeSession() {
  stop();
  if (thread_.joinable()) thread_.join();
}

void UeSession::stop() {
  impl_->stopping = true;
  impl_->sock.shutdown();
}

void UeSession::wait() {
  if (thread_.joinable()) thread_.join();
  if (failure_) std::rethrow_exception(failure_);
}

UeStats UeSession::stats() const {
  std::lock_guard lk(mu_);
  return stats_;
}

LinkState UeSession::link_state() const {
  std::lock_guard lk(mu_);
  return link_;
}

void UeSession::worker() {
  if (!cfg_.cores.empty()) pin_current_thread(cfg_.cores);
  auto& sock = impl_->sock;
  const auto& trace = *cfg_.trace;
  const std::size_t L = trace.num_bins();

  TimeSync ts;
  bool synced = false;
  std::unique_ptr<ChannelFilter> dl_filter, ul_filter;
  std::vector<cf32> dl, ul;
  std::optional<LinkAdapter> link;
  if (cfg_.noise_power > 0) link.emplace(cfg_.ue_id, cfg_.mcs_table, cfg_.tb);
  std::optional<TwinMetrics::UeHandles> handles;
  if (metrics_) handles = metrics_->ue(cfg_.ue_id);
  std::deque<std::pair<std::uint64_t, EchoProbe>> pending_echo;
  bool have_last = false;
  std::uint64_t last = 0;

  while (true) {
    const auto msg = sock.recv_message();
    switch (msg.type) {
      case MsgType::time_sync: {
        if (synced) break;
        ts = parse_time_sync(msg);
        if (ts.samples_per_slot < L)
          throw Error(Errc::InvalidArgument, "samples_per_slot " + std::to_string(ts.samples_per_slot) +
                                                 " is shorter than the trace (" + std::to_string(L) + " bins)");
        dl.assign(ts.samples_per_slot, cf32{});
        ul.assign(ts.samples_per_slot, cf32{});
        dl_filter = std::make_unique<ChannelFilter>(L, cfg_.sparse_n);
        ul_filter = std::make_unique<ChannelFilter>(L, cfg_.sparse_n);
        synced = true;
        std::lock_guard lk(mu_);
        stats_.mode = ts.mode;
        break;
      }
      case MsgType::echo_req:
        if (synced) pending_echo.emplace_back(msg.slot_index + ts.echo_delay_slots, parse_echo(msg));
        break;
      case MsgType::iq_dl: {
        if (!synced) throw Error(Errc::SessionFailure, "IQ_DL before TIME_SYNC");
        const std::uint64_t s = msg.slot_index;
        if (have_last && s <= last) {
          std::lock_guard lk(mu_);
          ++stats_.out_of_order;
          break;
        }
        if (msg.payload.size() != dl.size() * 8) {
          spdlog::warn("ue {}: slot {} downlink has {} bytes, expected {}", cfg_.ue_id, s, msg.payload.size(),
                       dl.size() * 8);
          break;
        }
        have_last = true;
        last = s;
        iq_samples_into(msg.payload, dl);
        const auto taps = trace.step(s);
        dl_filter->apply(taps, dl);
        if (cfg_.noise_power > 0)
          add_awgn(dl, cfg_.noise_power, awgn_stream_seed(cfg_.seed, s, cfg_.ue_id, Direction::downlink));
        if (downlink_) downlink_(s, dl);

        LinkState st;
        if (link) {
          const double snr = slot_snr_db(taps, cfg_.signal_power, cfg_.noise_power);
          st = link->step(s, snr, cfg_.offered_bits_per_slot);
          if (handles) TwinMetrics::record_link(*handles, st);
        }

        if (uplink_)
          uplink_(s, ul);
        else
          std::fill(ul.begin(), ul.end(), cf32{});
        if (ts.mode == SessionMode::optimized) ul_filter->apply(taps, ul);

        std::uint64_t echoed = 0;
        while (!pending_echo.empty() && pending_echo.front().first <= s) {
          auto& [target, probe] = pending_echo.front();
          if (!sock.send_message(make_echo(MsgType::echo_resp, cfg_.ue_id, target, probe)))
            throw Error(Errc::ConnectionLost, "gNB closed the connection");
          pending_echo.pop_front();
          ++echoed;
        }
        if (!sock.send_message(make_iq(MsgType::iq_ul, cfg_.ue_id, s, ul)))
          throw Error(Errc::ConnectionLost, "gNB closed the connection");

        std::lock_guard lk(mu_);
        ++stats_.frames;
        stats_.last_slot = s;
        stats_.echoes += echoed;
        if (link) link_ = st;
        break;
      }
      case MsgType::bye:
        spdlog::info("ue {}: gNB ended the session after {} frames", cfg_.ue_id, stats().frames);
        return;
      default:
        spdlog::debug("ue {}: ignoring message type {}", cfg_.ue_id, static_cast<int>(msg.type));
        break;
    }
  }
}

std::unique_ptr<UeSession> run_ue(UeConfig cfg, UeDownlinkSink downlink, UeUplinkSource uplink, TwinMetrics* metrics) {
  return std::make_unique<UeSession>(std::move(cfg), std::move(downlink), std::move(uplink), metrics);
}

IqPool::IqPool(std::uint64_t seed, std::uint32_t samples_per_slot, std::size_t frames)
    : samples_per_slot_(samples_per_slot) {
  if (frames == 0) throw Error(Errc::InvalidArgument, "IqPool needs at least one frame");
  Rng rng(seed);
  frames_.resize(frames);
  for (auto& f : frames_) {
    f.resize(samples_per_slot);
    for (auto& x : f) {
      const double ph = 2.0 * std::numbers::pi * rng.uniform();
      x = cf32(static_cast<float>(std::cos(ph)), static_cast<float>(std::sin(ph)));
    }
  }
}

std::span<const cf32> IqPool::frame(std::uint64_t index) const { return frames_[index % frames_.size()]; }

}  // namespace tinytwin
