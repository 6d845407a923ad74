// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"
#include "test_util.hpp"
#include "tinytwin/fronthaul.hpp"
#include "tinytwin/pinning.hpp"
#include "tinytwin/scenario.hpp"
#include "tinytwin/session.hpp"
#include "tinytwin/trace_gen.hpp"

#include <atomic>
#include <future>
#include <numeric>

using namespace testutil;
using namespace std::chrono_literals;
using tt::Errc;

namespace {

std::shared_ptr<const tt::CirTrace> shared(tt::CirTrace t) { return std::make_shared<const tt::CirTrace>(std::move(t)); }

tt::LocalSessionConfig base_config(std::uint64_t slots, std::uint32_t spp = 64) {
  tt::LocalSessionConfig c;
  c.samples_per_slot = spp;
  c.num_slots = slots;
  c.ue_timeout = 500ms;  // generous: correctness tests must not depend on scheduling
  return c;
}

std::shared_ptr<const tt::CirTrace> jakes(std::uint32_t bins, std::uint64_t seed, double seconds = 0.3) {
  tt::GeneratorSpec g;
  g.profile = "bench-exp";
  g.num_taps = bins;
  g.seed = seed;
  g.duration_s = seconds;
  return shared(tt::generate_trace(g));
}

std::vector<tt::cf32> frame_of(std::uint64_t seed, std::uint64_t slot, std::uint32_t n) {
  std::mt19937_64 rng(seed * 1000003 + slot);
  return random_iq(rng, n);
}

tt::UeUplinkSource deterministic_ul(std::uint64_t seed) {
  return [seed](std::uint64_t s, std::span<tt::cf32> out) {
    const auto f = frame_of(seed, s, static_cast<std::uint32_t>(out.size()));
    std::copy(f.begin(), f.end(), out.begin());
  };
}

}  // namespace

TEST_SUITE("fronthaul") {

TEST_CASE("slot clock arithmetic") {
  const auto epoch = tt::Clock::now();
  tt::SlotClock c(epoch, 1ms);
  CHECK(c.slot_start(3) == epoch + 3ms);
  CHECK(c.first_slot_at_or_after(epoch - 5ms) == 0);
  CHECK(c.first_slot_at_or_after(epoch + 2ms) == 2);
  CHECK(c.first_slot_at_or_after(epoch + 2ms + 1ns) == 3);
}

TEST_CASE("endpoint parsing") {
  const auto ep = tt::parse_endpoint("127.0.0.1:9000");
  CHECK(ep.host == "127.0.0.1");
  CHECK(ep.port == 9000);
  CHECK(tt::parse_endpoint(":80").host == "0.0.0.0");
  CHECK(error_code_of([] { tt::parse_endpoint("localhost"); }) == Errc::InvalidArgument);
  CHECK(error_code_of([] { tt::parse_endpoint("h:70000"); }) == Errc::InvalidArgument);
  CHECK(error_code_of([] { tt::parse_endpoint("h:12x"); }) == Errc::InvalidArgument);
}

TEST_CASE("identity channel relays both directions unchanged") {
  for (auto mode : {tt::SessionMode::optimized, tt::SessionMode::vanilla}) {
    CAPTURE(static_cast<int>(mode));
    auto c = base_config(40);
    c.mode = mode;
    c.capture_aggregate = true;
    c.capture_downlink = true;
    c.downlink_source = [](std::uint64_t s, std::span<tt::cf32> out) {
      const auto f = frame_of(99, s, static_cast<std::uint32_t>(out.size()));
      std::copy(f.begin(), f.end(), out.begin());
    };
    c.uplink_sources[3] = deterministic_ul(5);
    c.ues.push_back({3, shared(constant_trace({{1, 0}}, 10)), {}});
    const auto r = tt::run_local_session(c);
    REQUIRE(r.aggregates.size() == 40);
    REQUIRE(r.downlink.at(3).size() == 40 * 64);
    for (std::uint64_t s = 0; s < 40; ++s) {
      const auto dl = frame_of(99, s, 64);
      CHECK(std::equal(dl.begin(), dl.end(), r.downlink.at(3).begin() + static_cast<std::ptrdiff_t>(s * 64)));
      CHECK(r.aggregates[s] == frame_of(5, s, 64));
    }
    CHECK(r.gnb.ue_timeouts == 0);
    CHECK(r.ue_stats.at(3).mode == mode);
  }
}

TEST_CASE("one-sample delay tap shifts the stream across slot edges") {
  auto c = base_config(10, 8);
  c.capture_downlink = true;
  c.downlink_source = [](std::uint64_t s, std::span<tt::cf32> out) {
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = tt::cf32(static_cast<float>(s * out.size() + k + 1), 0);
  };
  c.ues.push_back({0, shared(constant_trace({{0, 0}, {1, 0}})), {}});
  const auto r = tt::run_local_session(c);
  const auto& dl = r.downlink.at(0);
  REQUIRE(dl.size() == 80);
  CHECK(dl[0] == tt::cf32(0, 0));
  for (std::size_t k = 1; k < dl.size(); ++k) CHECK(dl[k] == tt::cf32(static_cast<float>(k), 0));
}

TEST_CASE("uplink aggregate sums the per-UE channels") {
  for (auto mode : {tt::SessionMode::optimized, tt::SessionMode::vanilla}) {
    auto c = base_config(30);
    c.mode = mode;
    c.capture_aggregate = true;
    c.uplink_sources[1] = deterministic_ul(7);
    c.uplink_sources[2] = deterministic_ul(7);
    c.ues.push_back({1, shared(constant_trace({{1, 0}})), {}});
    c.ues.push_back({2, shared(constant_trace({{2, 0}})), {}});
    const auto r = tt::run_local_session(c);
    REQUIRE(r.aggregates.size() == 30);
    for (std::uint64_t s = 0; s < 30; ++s) {
      const auto x = frame_of(7, s, 64);
      for (std::size_t k = 0; k < 64; ++k) CHECK(r.aggregates[s][k] == 3.0f * x[k]);
    }
  }
}

TEST_CASE("vanilla and optimized aggregates agree on fading channels") {
  auto c = base_config(200);
  c.capture_aggregate = true;
  for (std::uint32_t u = 0; u < 3; ++u) c.ues.push_back({u, jakes(5 + 5 * u, 40 + u), {}});
  c.mode = tt::SessionMode::vanilla;
  const auto v = tt::run_local_session(c);
  c.mode = tt::SessionMode::optimized;
  const auto o = tt::run_local_session(c);
  REQUIRE(v.aggregates.size() == o.aggregates.size());
  double worst = 0;
  for (std::size_t s = 0; s < v.aggregates.size(); ++s) worst = std::max(worst, rel_rms(o.aggregates[s], v.aggregates[s]));
  CHECK(worst <= 1e-5);
  CHECK(v.gnb.ue_timeouts == 0);
  CHECK(o.gnb.ue_timeouts == 0);
}

TEST_CASE("a UE's downlink does not depend on other UEs") {
  auto c = base_config(60);
  c.capture_downlink = true;
  c.noise_power = 0.01;
  c.ues.push_back({1, jakes(6, 1), {}});
  const auto alone = tt::run_local_session(c);
  c.ues.push_back({2, jakes(20, 2), {}});
  c.ues.push_back({3, shared(constant_trace({{0.5f, 0}})), {}});
  const auto crowd = tt::run_local_session(c);
  CHECK(alone.downlink.at(1) == crowd.downlink.at(1));
}

TEST_CASE("slot indices are strictly increasing and every slot is delivered") {
  auto c = base_config(100);
  c.ues.push_back({0, jakes(4, 9), {}});
  c.ues.push_back({1, jakes(4, 10), {}});
  const auto r = tt::run_local_session(c);
  REQUIRE(r.timing.size() == 100);
  for (std::size_t i = 0; i < r.timing.size(); ++i) CHECK(r.timing[i].slot_index == i);
  for (const auto& [id, st] : r.ue_stats) {
    CHECK(st.frames == 100);
    CHECK(st.last_slot == 99);
    CHECK(st.out_of_order == 0);
  }
  CHECK(r.gnb.slots == 100);
}

TEST_CASE("a late UE is zero-substituted and counted") {
  auto c = base_config(30);
  c.ue_timeout = 5ms;
  c.capture_aggregate = true;
  c.uplink_sources[1] = deterministic_ul(1);
  c.uplink_sources[2] = [](std::uint64_t s, std::span<tt::cf32> out) {
    if (s == 5) std::this_thread::sleep_for(60ms);
    std::fill(out.begin(), out.end(), tt::cf32(100, 0));
  };
  c.ues.push_back({1, shared(constant_trace({{1, 0}})), {}});
  c.ues.push_back({2, shared(constant_trace({{1, 0}})), {}});
  const auto r = tt::run_local_session(c);
  CHECK(r.gnb.ue_timeouts >= 1);
  REQUIRE(r.aggregates.size() == 30);
  CHECK(r.aggregates[5] == frame_of(1, 5, 64));
  // the session carries on and the UE catches up
  CHECK(r.ue_stats.at(2).frames == 30);
  const auto& last = r.aggregates.back();
  const auto x = frame_of(1, 29, 64);
  CHECK(last[0] == x[0] + tt::cf32(100, 0));
}

TEST_CASE("unknown UE id is rejected at handshake") {
  tt::GnbConfig g;
  g.samples_per_slot = 16;
  g.ues.push_back({1, shared(constant_trace({{1, 0}}))});
  g.handshake_timeout = 3s;
  auto gnb = tt::run_gnb(g, nullptr, nullptr);
  auto accepting = std::async(std::launch::async, [&] { gnb->accept_ues(); });
  tt::UeConfig u;
  u.ue_id = 9;
  u.trace = shared(constant_trace({{1, 0}}));
  u.port = gnb->port();
  CHECK(error_code_of([&] { tt::run_ue(u, nullptr, nullptr); }) == Errc::HandshakeRejected);
  gnb->stop();
  CHECK(error_code_of([&] { accepting.get(); }) == Errc::SessionFailure);
}

TEST_CASE("gNB config validation") {
  tt::GnbConfig g;
  CHECK(error_code_of([&] { tt::run_gnb(g, nullptr, nullptr); }) == Errc::InvalidArgument);
  g.ues.push_back({1, shared(constant_trace({{1, 0}}))});
  g.ues.push_back({1, shared(constant_trace({{1, 0}}))});
  CHECK(error_code_of([&] { tt::run_gnb(g, nullptr, nullptr); }) == Errc::InvalidArgument);
  g.ues.pop_back();
  g.samples_per_slot = 0;
  CHECK(error_code_of([&] { tt::run_gnb(g, nullptr, nullptr); }) == Errc::InvalidArgument);
}

TEST_CASE("echo round trip spans the reply delay") {
  auto c = base_config(400);
  c.echo_count = 20;
  c.ues.push_back({4, jakes(3, 4), {}});
  const auto r = tt::run_local_session(c);
  REQUIRE(r.echo_rtts.size() == 20);
  for (auto rtt : r.echo_rtts) CHECK(rtt >= 2ms);
  CHECK(r.ue_stats.at(4).echoes == 20);
}

TEST_CASE("received power tracks the UMa trace") {
  tt::GeneratorSpec g;
  g.profile = "uma";
  g.speed_kmh = 3.0;
  g.duration_s = 0.5;
  g.seed = 17;
  auto trace = shared(tt::generate_trace(g));
  auto c = base_config(500, 1920);
  c.slot_duration = 500us;
  std::vector<double> measured(500, -1.0);
  c.downlink_sinks[0] = [&measured](std::uint64_t s, std::span<const tt::cf32> rx) {
    double p = 0;
    for (auto x : rx) p += std::norm(tt::cf64(x));
    measured[s] = p / static_cast<double>(rx.size());
  };
  c.ues.push_back({0, trace, {}});
  tt::run_local_session(c);
  double worst = 0;
  double sum_meas = 0, sum_trace = 0;
  for (std::uint64_t s = 1; s < 500; ++s) {
    REQUIRE(measured[s] > 0);
    const double want = tt::step_power(trace->step(s));
    sum_meas += measured[s];
    sum_trace += want;
    worst = std::max(worst, std::abs(10 * std::log10(measured[s] / want)));
  }
  CHECK(std::abs(10 * std::log10(sum_meas / sum_trace)) <= 0.5);
  MESSAGE("worst per-slot deviation " << worst << " dB");
}

TEST_CASE("UE worker honours its core assignment") {
  auto c = base_config(5);
  std::vector<unsigned> seen;
  c.downlink_sinks[0] = [&seen](std::uint64_t, std::span<const tt::cf32>) { seen = tt::current_thread_affinity(); };
  c.ues.push_back({0, shared(constant_trace({{1, 0}})), {0}});
  tt::run_local_session(c);
  CHECK(seen == std::vector<unsigned>{0});
  c.ues.back().cores = {tt::host_core_count()};
  CHECK(error_code_of([&] { tt::run_local_session(c); }) == Errc::InvalidCore);
}

TEST_CASE("IQ pool frames have unit modulus and repeat") {
  tt::IqPool pool(3, 32, 4);
  for (auto x : pool.frame(1)) CHECK(std::abs(x) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::equal(pool.frame(1).begin(), pool.frame(1).end(), pool.frame(5).begin()));
}

}
