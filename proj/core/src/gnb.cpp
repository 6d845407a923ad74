// SPDX-License-Identifier: Apache-2.0
#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include "socket.hpp"
#include "tinytwin/fronthaul.hpp"
#include "tinytwin/pinning.hpp"

namespace tinytwin {

std::uint64_t SlotClock::first_slot_at_or_after(Clock::time_point t) const {
  if (t <= epoch_) return 0;
  const auto d = slot_duration_.count();
  const auto dt = std::chrono::duration_cast<std::chrono::nanoseconds>(t - epoch_).count();
  return static_cast<std::uint64_t>((dt + d - 1) / d);
}

struct GnbSession::ListenerHolder {
  net::Listener listener;
};

struct GnbSession::UeLink {
  std::uint32_t ue_id = 0;
  std::shared_ptr<const CirTrace> trace;
  net::Socket sock;
  std::mutex send_mu;
  std::thread reader;
  // guarded by GnbSession::mu_
  bool connected = false;
  bool counted_disconnect = false;
  std::map<std::uint64_t, std::vector<cf32>> ul;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> echo_resps;  // (slot, probe id)

  std::unique_ptr<ChannelFilter> ul_filter;  // vanilla only
};

struct GnbSession::EchoProbeState {
  std::uint64_t id = 0;
  std::uint32_t ue_id = 0;
  std::vector<std::byte> data;
  Clock::time_point injected;
  std::uint64_t target_slot = 0;
  bool sent = false;
  bool done = false;
  Clock::time_point completed;
};

namespace {

void validate_gnb(const GnbConfig& cfg) {
  if (cfg.samples_per_slot == 0) throw Error(Errc::InvalidArgument, "samples_per_slot must be positive");
  if (cfg.slot_duration.count() <= 0) throw Error(Errc::InvalidArgument, "slot_duration must be positive");
  if (cfg.noise_power < 0 || !std::isfinite(cfg.noise_power))
    throw Error(Errc::InvalidArgument, "noise_power must be finite and >= 0");
  if (cfg.ues.empty()) throw Error(Errc::InvalidArgument, "session has no UEs");
  std::set<std::uint32_t> ids;
  for (const auto& u : cfg.ues) {
    if (!ids.insert(u.ue_id).second) throw Error(Errc::InvalidArgument, "duplicate UE id " + std::to_string(u.ue_id));
    if (cfg.mode == SessionMode::vanilla && !u.trace)
      throw Error(Errc::InvalidArgument, "vanilla mode needs a trace for UE " + std::to_string(u.ue_id));
    if (u.trace) {
      u.trace->validate();
      if (u.trace->num_bins() > cfg.samples_per_slot)
        throw Error(Errc::InvalidArgument, "samples_per_slot is shorter than the trace of UE " + std::to_string(u.ue_id));
    }
  }
}

}  // namespace

GnbSession::GnbSession(GnbConfig cfg, DownlinkSource downlink, UplinkSink uplink, TwinMetrics* metrics)
    : cfg_(std::move(cfg)), downlink_(std::move(downlink)), uplink_(std::move(uplink)), metrics_(metrics) {
  validate_gnb(cfg_);
  std::sort(cfg_.ues.begin(), cfg_.ues.end(), [](const UeChannel& a, const UeChannel& b) { return a.ue_id < b.ue_id; });
  for (const auto& u : cfg_.ues) {
    auto link = std::make_unique<UeLink>();
    link->ue_id = u.ue_id;
    link->trace = u.trace;
    if (cfg_.mode == SessionMode::vanilla) link->ul_filter = std::make_unique<ChannelFilter>(u.trace->num_bins(), cfg_.sparse_n);
    ues_.push_back(std::move(link));
  }
  listener_ = std::make_unique<ListenerHolder>(ListenerHolder{net::Listener(cfg_.listen_host, cfg_.listen_port)});
  spdlog::info("gnb listening on {}:{} ({} mode, {} UEs)", cfg_.listen_host, listener_->listener.port(),
               cfg_.mode == SessionMode::vanilla ? "vanilla" : "optimized", ues_.size());
}

GnbSession::~GnbSession() {
  stop();
  if (slot_thread_.joinable()) slot_thread_.join();
  for (auto& u : ues_) u->sock.shutdown();
  for (auto& u : ues_)
    if (u->reader.joinable()) u->reader.join();
}

std::uint16_t GnbSession::port() const { return listener_->listener.port(); }

void GnbSession::accept_ues() {
  const auto deadline = Clock::now() + cfg_.handshake_timeout;
  std::size_t accepted = 0;
  for (const auto& u : ues_)
    if (u->sock.valid()) ++accepted;

  while (accepted < ues_.size()) {
    if (stop_requested_) throw Error(Errc::SessionFailure, "stopped while waiting for UEs");
    const auto now = Clock::now();
    if (now >= deadline) {
      std::string missing;
      for (const auto& u : ues_)
        if (!u->sock.valid()) missing += (missing.empty() ? "" : ",") + std::to_string(u->ue_id);
      throw Error(Errc::SessionFailure, "timed out waiting for UEs [" + missing + "]");
    }
    const auto wait = std::min(std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now),
                               std::chrono::milliseconds(100));
    auto sock = listener_->listener.accept(wait);
    if (!sock.valid()) continue;
    if (!sock.wait_readable(std::chrono::milliseconds(2000))) {
      spdlog::warn("gnb: peer connected but sent no HELLO");
      continue;
    }
    WireMessage hello;
    try {
      hello = sock.recv_message();
    } catch (const Error& e) {
      spdlog::warn("gnb: bad handshake: {}", e.what());
      continue;
    }
    auto it = std::find_if(ues_.begin(), ues_.end(), [&](const auto& u) { return u->ue_id == hello.ue_id; });
    if (hello.type != MsgType::hello || it == ues_.end() || (*it)->sock.valid()) {
      spdlog::warn("gnb: rejecting UE {} (unknown, duplicate or not HELLO)", hello.ue_id);
      sock.send_message(WireMessage{MsgType::bye, hello.ue_id, 0, {}});
      continue;
    }
    sock.send_message(WireMessage{MsgType::hello_ack, hello.ue_id, 0, {}});
    (*it)->sock = std::move(sock);
    {
      std::lock_guard lk(mu_);
      (*it)->connected = true;
    }
    ++accepted;
    spdlog::info("gnb: UE {} attached", hello.ue_id);
  }
  for (auto& u : ues_)
    if (!u->reader.joinable()) u->reader = std::thread([this, link = u.get()] { reader_loop(*link); });
}

void GnbSession::reader_loop(UeLink& ue) {
  try {
    while (true) {
      auto msg = ue.sock.recv_message();
      if (msg.type == MsgType::iq_ul) {
        if (msg.payload.size() != static_cast<std::size_t>(cfg_.samples_per_slot) * 8) {
          spdlog::warn("gnb: UE {} slot {} uplink has {} bytes, expected {}", ue.ue_id, msg.slot_index,
                       msg.payload.size(), cfg_.samples_per_slot * 8);
          continue;
        }
        auto samples = iq_samples(msg);
        std::lock_guard lk(mu_);
        if (msg.slot_index >= collecting_slot_) ue.ul[msg.slot_index] = std::move(samples);
        cv_.notify_all();
      } else if (msg.type == MsgType::echo_resp) {
        const auto probe = parse_echo(msg);
        std::lock_guard lk(mu_);
        ue.echo_resps.emplace_back(msg.slot_index, probe.probe_id);
      } else if (msg.type == MsgType::bye) {
        break;
      } else {
        spdlog::debug("gnb: ignoring message type {} from UE {}", static_cast<int>(msg.type), ue.ue_id);
      }
    }
  } catch (const Error& e) {
    if (running_) spdlog::warn("gnb: UE {} link lost: {}", ue.ue_id, e.what());
  }
  std::lock_guard lk(mu_);
  ue.connected = false;
  cv_.notify_all();
}

void GnbSession::start(std::uint64_t num_slots) {
  if (slot_thread_.joinable()) throw Error(Errc::SessionFailure, "session already started");
  for (const auto& u : ues_)
    if (!u->sock.valid()) throw Error(Errc::SessionFailure, "UE " + std::to_string(u->ue_id) + " not attached");
  {
    std::lock_guard lk(mu_);
    clock_ = SlotClock(Clock::now() + cfg_.start_lead, cfg_.slot_duration);
    clock_started_ = true;
  }
  TimeSync ts;
  ts.epoch_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(clock_.epoch().time_since_epoch()).count();
  ts.slot_duration_ns = cfg_.slot_duration.count();
  ts.samples_per_slot = cfg_.samples_per_slot;
  ts.mode = cfg_.mode;
  ts.echo_delay_slots = cfg_.echo_delay_slots;
  for (auto& u : ues_) {
    std::lock_guard lk(u->send_mu);
    if (!u->sock.send_message(make_time_sync(u->ue_id, ts)))
      throw Error(Errc::ConnectionLost, "UE " + std::to_string(u->ue_id) + " dropped before TIME_SYNC");
  }
  timing_.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(num_slots, 1u << 24)));
  running_ = true;
  slot_thread_ = std::thread([this, num_slots] {
    try {
      slot_loop(num_slots);
    } catch (...) {
      failure_ = std::current_exception();
    }
    broadcast_bye();
    {
      std::lock_guard lk(mu_);
      running_ = false;
    }
    cv_.notify_all();
  });
}

void GnbSession::slot_loop(std::uint64_t num_slots) {
  if (!cfg_.cores.empty()) pin_current_thread(cfg_.cores);
  const std::size_t n = cfg_.samples_per_slot;
  std::vector<cf32> dl(n), agg(n), zeros(n);
  std::vector<std::vector<cf32>> frames(ues_.size());
  std::vector<bool> present(ues_.size());
  std::array<std::byte, kWireHeaderSize> hdr{};
  std::vector<std::shared_ptr<EchoProbeState>> to_send;

  for (std::uint64_t s = 0; s < num_slots && !stop_requested_; ++s) {
    const auto scheduled = clock_.slot_start(s);
    if (Clock::now() < scheduled) std::this_thread::sleep_until(scheduled);
    if (downlink_)
      downlink_(s, dl);
    else
      std::fill(dl.begin(), dl.end(), cf32{});

    const auto t0 = Clock::now();
    const auto dl_msg = make_iq(MsgType::iq_dl, 0, s, dl);
    to_send.clear();
    {
      std::lock_guard lk(mu_);
      collecting_slot_ = s;
      next_send_slot_ = s + 1;
      for (auto& p : probes_)
        if (!p->sent && p->target_slot <= s) {
          p->sent = true;
          p->target_slot = s;
          to_send.push_back(p);
        }
    }
    for (auto& u : ues_) {
      std::lock_guard slk(u->send_mu);
      bool ok = true;
      for (const auto& p : to_send)
        if (p->ue_id == u->ue_id)
          ok = ok && u->sock.send_message(make_echo(MsgType::echo_req, u->ue_id, s, EchoProbe{p->id, p->data}));
      encode_header(WireHeader{MsgType::iq_dl, u->ue_id, s, static_cast<std::uint32_t>(dl_msg.payload.size())}, hdr);
      ok = ok && u->sock.send_parts(hdr, dl_msg.payload);
      if (!ok) {
        std::lock_guard lk(mu_);
        u->connected = false;
      }
    }

    // Barrier: every connected UE's frame for s, or the timeout.
    {
      std::unique_lock lk(mu_);
      cv_.wait_until(lk, t0 + cfg_.ue_timeout, [&] {
        if (stop_requested_) return true;
        return std::all_of(ues_.begin(), ues_.end(),
                           [&](const auto& u) { return !u->connected || u->ul.count(s) != 0; });
      });
      const auto collected_at = Clock::now();
      for (std::size_t i = 0; i < ues_.size(); ++i) {
        auto& u = *ues_[i];
        auto it = u.ul.find(s);
        present[i] = it != u.ul.end();
        if (present[i]) frames[i] = std::move(it->second);
        u.ul.erase(u.ul.begin(), u.ul.upper_bound(s));
        if (!present[i]) {
          if (u.connected) {
            ++stats_.ue_timeouts;
            if (metrics_) metrics_->count_ue_timeout(u.ue_id);
            spdlog::debug("gnb: UeTimeout slot {} ue {}", s, u.ue_id);
          } else if (!u.counted_disconnect) {
            u.counted_disconnect = true;
            ++stats_.disconnects;
          }
        }
        for (auto r = u.echo_resps.begin(); r != u.echo_resps.end();) {
          if (r->first > s) {
            ++r;
            continue;
          }
          for (auto& p : probes_)
            if (p->id == r->second && !p->done) {
              p->done = true;
              p->completed = collected_at;
            }
          r = u.echo_resps.erase(r);
        }
      }
      std::erase_if(probes_, [](const auto& p) { return p->done; });
    }
    cv_.notify_all();

    std::fill(agg.begin(), agg.end(), cf32{});
    for (std::size_t i = 0; i < ues_.size(); ++i) {
      auto& u = *ues_[i];
      std::span<cf32> frame = present[i] ? std::span<cf32>(frames[i]) : std::span<cf32>(zeros);
      if (u.ul_filter) {
        // keep the stream's tail consistent even for substituted frames
        if (!present[i]) std::fill(zeros.begin(), zeros.end(), cf32{});
        u.ul_filter->apply(u.trace->step(s), frame);
      }
      for (std::size_t k = 0; k < n; ++k) agg[k] += frame[k];
    }
    if (cfg_.noise_power > 0)
      add_awgn(agg, cfg_.noise_power, awgn_stream_seed(cfg_.seed, s, 0xFFFFFFFFu, Direction::uplink));
    const auto t1 = Clock::now();

    SlotTimingRecord rec;
    rec.slot_index = s;
    rec.compute = std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0);
    rec.deadline = cfg_.slot_duration;
    rec.overrun = rec.compute > rec.deadline;
    {
      std::lock_guard lk(mu_);
      timing_.push_back(rec);
      ++stats_.slots;
      if (rec.overrun) ++stats_.overruns;
    }
    if (metrics_) metrics_->observe_slot(std::chrono::duration<double>(rec.compute).count());
    clock_.advance();
    if (uplink_) uplink_(s, agg);
  }
}

void GnbSession::broadcast_bye() {
  for (auto& u : ues_) {
    std::lock_guard slk(u->send_mu);
    if (u->sock.valid()) u->sock.send_message(WireMessage{MsgType::bye, u->ue_id, clock_.current_slot(), {}});
  }
}

void GnbSession::wait() {
  if (slot_thread_.joinable()) slot_thread_.join();
  if (failure_) std::rethrow_exception(failure_);
}

void GnbSession::stop() {
  stop_requested_ = true;
  cv_.notify_all();
}

std::vector<std::chrono::nanoseconds> GnbSession::echo_rtt(std::uint32_t ue_id, std::span<const std::byte> payload,
                                                           std::size_t count, std::chrono::milliseconds timeout) {
  if (std::none_of(ues_.begin(), ues_.end(), [&](const auto& u) { return u->ue_id == ue_id; }))
    throw Error(Errc::InvalidArgument, "unknown UE " + std::to_string(ue_id));
  std::vector<std::chrono::nanoseconds> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto p = std::make_shared<EchoProbeState>();
    std::unique_lock lk(mu_);
    if (!clock_started_ || !running_) throw Error(Errc::SessionFailure, "echo probe needs a running session");
    p->id = next_probe_id_++;
    p->ue_id = ue_id;
    p->data.assign(payload.begin(), payload.end());
    p->injected = Clock::now();
    p->target_slot = std::max(clock_.first_slot_at_or_after(p->injected), next_send_slot_);
    probes_.push_back(p);
    const bool ok = cv_.wait_for(lk, timeout, [&] { return p->done || !running_; });
    if (!ok || !p->done) {
      std::erase(probes_, p);
      throw Error(Errc::EchoTimeout, "probe " + std::to_string(p->id) + " to UE " + std::to_string(ue_id) +
                                         " got no response");
    }
    out.push_back(std::chrono::duration_cast<std::chrono::nanoseconds>(p->completed - p->injected));
  }
  return out;
}

std::vector<SlotTimingRecord> GnbSession::timing() const {
  std::lock_guard lk(mu_);
  return timing_;
}

GnbStats GnbSession::stats() const {
  std::lock_guard lk(mu_);
  return stats_;
}

std::unique_ptr<GnbSession> run_gnb(GnbConfig cfg, DownlinkSource downlink, UplinkSink uplink, TwinMetrics* metrics) {
  return std::make_unique<GnbSession>(std::move(cfg), std::move(downlink), std::move(uplink), metrics);
}

}  // namespace tinytwin
