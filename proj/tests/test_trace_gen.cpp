// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cstdlib>
#include <fstream>

#include "doctest.h"
#include "test_util.hpp"
#include "tinytwin/trace_gen.hpp"

using namespace testutil;
using tt::Errc;

namespace {

double mean_power(const std::vector<tt::cf64>& g) {
  double p = 0;
  for (auto x : g) p += std::norm(x);
  return p / static_cast<double>(g.size());
}

/// Normalised real autocorrelation at `lag` steps.
double autocorr(const std::vector<tt::cf64>& g, std::size_t lag) {
  tt::cf64 acc{};
  const std::size_t n = g.size() - lag;
  for (std::size_t i = 0; i < n; ++i) acc += g[i + lag] * std::conj(g[i]);
  return (acc / static_cast<double>(n)).real() / mean_power(g);
}

}  // namespace

TEST_SUITE("trace_gen") {

TEST_CASE("Bessel oracle agrees with the standard library") {
  for (double x : {0.0, 0.1, 1.0, 2.4048, 5.0, 12.2})
    CHECK(j0_quadrature(x) == doctest::Approx(std::cyl_bessel_j(0.0, x)).epsilon(1e-9));
}

TEST_CASE("Doppler from speed") {
  CHECK(tt::doppler_from_speed(0) == 0.0);
  // 60 km/h at 3.5 GHz: 194.58 Hz with c = 299792458 m/s (194.4 Hz with c rounded to 3e8)
  CHECK(tt::doppler_from_speed(60) == doctest::Approx(194.4).epsilon(2e-3));
  CHECK(tt::doppler_from_speed(5) == doctest::Approx(16.2).epsilon(2e-3));
  CHECK(tt::doppler_from_speed(60, 3.5e9) == doctest::Approx(60 / 3.6 * 3.5e9 / 299792458.0));
}

TEST_CASE("Jakes gains: unit power and J0 autocorrelation") {
  for (double fd : {16.2, 194.4}) {
    CAPTURE(fd);
    tt::JakesConfig cfg;
    cfg.doppler_hz = fd;
    cfg.duration_s = 20.0;  // 2e4 steps
    cfg.seed = 5;
    const auto g = tt::gen_jakes_gains(cfg);
    REQUIRE(g.size() == 20000);
    CHECK(std::abs(mean_power(g) - 1.0) < 0.03);
    for (std::size_t lag : {1u, 2u, 5u, 10u}) {
      const double want = j0_quadrature(2 * M_PI * fd * lag * 1e-3);
      CAPTURE(lag);
      CHECK(std::abs(autocorr(g, lag) - want) < 0.05);
    }
  }
}

TEST_CASE("Jakes is deterministic per seed and distinct across seeds") {
  tt::JakesConfig cfg;
  cfg.doppler_hz = 50;
  cfg.seed = 9;
  const auto a = tt::gen_jakes_gains(cfg);
  const auto b = tt::gen_jakes_gains(cfg);
  CHECK(a == b);
  cfg.seed = 10;
  CHECK(tt::gen_jakes_gains(cfg) != a);
}

TEST_CASE("zero Doppler is a constant unit-magnitude gain") {
  tt::JakesConfig cfg;
  cfg.doppler_hz = 0;
  cfg.seed = 1;
  const auto g = tt::gen_jakes_gains(cfg);
  for (auto x : g) {
    CHECK(std::abs(x) == doctest::Approx(1.0));
    CHECK(x == g.front());
  }
}

TEST_CASE("Nyquist and argument checks") {
  tt::JakesConfig cfg;
  cfg.doppler_hz = 500;  // 0.5 cycles per 1 ms step
  CHECK(error_code_of([&] { tt::gen_jakes_gains(cfg); }) == Errc::NyquistViolation);
  cfg.doppler_hz = 10;
  cfg.num_sinusoids = 4;
  CHECK(error_code_of([&] { tt::gen_jakes_gains(cfg); }) == Errc::InvalidArgument);
  cfg.num_sinusoids = 16;
  cfg.duration_s = 0;
  CHECK(error_code_of([&] { tt::gen_jakes_gains(cfg); }) == Errc::InvalidArgument);
}

TEST_CASE("resampler: on-grid paths land on one bin") {
  const auto grid = tt::DelayGrid::from_spacing(100.0, 5);
  const auto taps = tt::resample_paths({{0, {1, 0}}, {300, {0, 0.5}}}, grid);
  CHECK(taps[0] == tt::cf64(1, 0));
  CHECK(taps[3] == tt::cf64(0, 0.5));
  CHECK(std::norm(taps[1]) + std::norm(taps[2]) + std::norm(taps[4]) == 0.0);
}

TEST_CASE("resampler preserves total gain and first delay moment") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> delay(0, 900), amp(-1, 1);
  const auto grid = tt::DelayGrid::from_spacing(100.0, 10);
  for (int trial = 0; trial < 200; ++trial) {
    tt::PathList paths;
    for (int k = 0; k < 6; ++k) paths.push_back({delay(rng), {amp(rng), amp(rng)}});
    const auto taps = tt::resample_paths(paths, grid);
    tt::cf64 g0{}, g1{}, t0{}, t1{};
    for (const auto& p : paths) {
      g0 += p.gain;
      g1 += p.gain * p.delay_ns;
    }
    for (std::size_t b = 0; b < taps.size(); ++b) {
      t0 += taps[b];
      t1 += taps[b] * (100.0 * b);
    }
    CHECK(std::abs(t0 - g0) < 1e-12);
    CHECK(std::abs(t1 - g1) < 1e-9);
  }
}

TEST_CASE("resampler rejects delays past the grid") {
  const auto grid = tt::DelayGrid::from_spacing(100.0, 3);
  CHECK(error_code_of([&] { tt::resample_paths({{200.5, {1, 0}}}, grid); }) == Errc::GridTooShort);
  CHECK_NOTHROW(tt::resample_paths({{200.0, {1, 0}}}, grid));
}

TEST_CASE("3GPP trace: per-bin power matches the gridded PDP") {
  tt::PdpProfile pdp;
  pdp.name = "t";
  pdp.path_delays_ns = {0, 150, 400};
  pdp.path_powers_db = {0, -3, -6};
  pdp.doppler_hz = 100;
  pdp.normalize();
  const auto grid = tt::DelayGrid::from_spacing(100.0, 5);
  const auto p = pdp.linear_powers();

  // oracle: E|h_b|^2 = sum_k p_k w_kb^2 / sum_b w_kb^2
  std::vector<double> want(5, 0.0);
  want[0] += p[0];
  want[1] += p[1] * 0.25 / 0.5;
  want[2] += p[1] * 0.25 / 0.5;
  want[4] += p[2];

  std::vector<double> got(5, 0.0);
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    const auto t = tt::build_3gpp_trace(pdp, grid, 5.0, 100 + s);
    CHECK(t.num_steps == 5000);
    for (std::uint32_t n = 0; n < t.num_steps; ++n)
      for (std::uint32_t b = 0; b < 5; ++b) got[b] += std::norm(tt::cf64(t.step(n)[b]));
  }
  for (std::uint32_t b = 0; b < 5; ++b) {
    got[b] /= seeds * 5000.0;
    CAPTURE(b);
    CHECK(got[b] == doctest::Approx(want[b]).epsilon(0.05));
  }
  CHECK(got[3] == 0.0);
}

TEST_CASE("3GPP trace determinism") {
  const auto pdp = tt::builtin_profile("umi");
  const auto grid = tt::grid_for_profile(pdp, 30.72e6);
  auto a = tt::build_3gpp_trace(pdp, grid, 0.5, 77);
  auto b = tt::build_3gpp_trace(pdp, grid, 0.5, 77);
  CHECK(a == b);
}

TEST_CASE("built-in profiles fit their grids") {
  for (const auto& name : tt::builtin_profile_names()) {
    const auto pdp = tt::builtin_profile(name);
    const auto grid = tt::grid_for_profile(pdp, 1.92e6);
    CHECK_NOTHROW(tt::build_3gpp_trace(pdp, grid, 0.1, 1));
    CHECK(std::is_sorted(pdp.path_delays_ns.begin(), pdp.path_delays_ns.end()));
  }
  CHECK(error_code_of([] { tt::builtin_profile("nope"); }) == Errc::InvalidArgument);
}

TEST_CASE("profile directory override is searched first") {
  TempDir dir;
  {
    std::ofstream f(dir / "uma.json");
    f << R"({"name": "uma", "delays_ns": [0, 100], "powers_db": [0, -3]})";
    std::ofstream g(dir / "custom.json");
    g << R"({"name": "custom", "delays_ns": [0], "powers_db": [0]})";
    std::ofstream bad(dir / "broken.json");
    bad << R"({"name": "broken", "delays_ns": [200, 0], "powers_db": [0, 0]})";
  }
  ::setenv("TINYTWIN_PROFILE_DIR", dir.path.c_str(), 1);
  const auto uma = tt::builtin_profile("uma");
  const auto custom = tt::builtin_profile("custom");
  const auto broken = error_code_of([] { tt::builtin_profile("broken"); });
  const auto names = tt::builtin_profile_names();
  ::unsetenv("TINYTWIN_PROFILE_DIR");
  CHECK(uma.path_delays_ns.size() == 2);
  CHECK(custom.path_delays_ns.size() == 1);
  CHECK(broken == Errc::InvalidArgument);
  CHECK(std::find(names.begin(), names.end(), "custom") != names.end());
  CHECK(tt::builtin_profile("uma").path_delays_ns.size() == 24);
  CHECK(error_code_of([] { tt::builtin_profile("../uma"); }) == Errc::InvalidArgument);
}

TEST_CASE("periodic SNR trace sweeps high to low and restarts") {
  const auto grid = tt::DelayGrid::from_sample_rate(1.92e6, 1);
  const auto t = tt::gen_periodic_snr_trace(10.0, 20.0, 0.0, 30.0, grid);
  REQUIRE(t.num_steps == 30000);
  CHECK(tt::tap_power_db(t, 0) == doctest::Approx(0.0));
  CHECK(tt::tap_power_db(t, 5000) == doctest::Approx(-10.0).epsilon(1e-5));
  CHECK(tt::tap_power_db(t, 9999) == doctest::Approx(-19.998).epsilon(1e-4));
  CHECK(tt::tap_power_db(t, 10000) == doctest::Approx(0.0));
  for (std::uint32_t n = 1; n < 10000; ++n) CHECK_LE(tt::tap_power_db(t, n), tt::tap_power_db(t, n - 1));
  CHECK(error_code_of([&] { tt::gen_periodic_snr_trace(10.0, 20.0, 0.0, 5.0, grid); }) == Errc::InvalidArgument);
}

TEST_CASE("CSV import groups rows by step and holds gaps") {
  TempDir dir;
  {
    std::ofstream f(dir / "cir.csv");
    f << "# exported channel\n"
         "time_s,delay_ns,re,im\n"
         "0.000,0,1,0\n"
         "0.000,520.8333333,0,0.5\n"
         "0.001,0,0.5,0\n"
         "0.003,0,0.25,0\n";
  }
  const auto t = tt::import_external_cir(dir / "cir.csv", tt::ImportFormat::csv_paths);
  REQUIRE(t.num_steps == 4);
  REQUIRE(t.num_bins() == 2);
  CHECK(t.step(0)[0] == tt::cf32(1, 0));
  CHECK(std::abs(t.step(0)[1] - tt::cf32(0, 0.5f)) < 1e-6f);
  CHECK(t.step(1)[0] == tt::cf32(0.5f, 0));
  CHECK(t.step(2)[0] == t.step(1)[0]);  // gap holds the previous step
  CHECK(t.step(3)[0] == tt::cf32(0.25f, 0));
}

TEST_CASE("CSV import errors") {
  TempDir dir;
  {
    std::ofstream f(dir / "bad.csv");
    f << "0,0,1,0\n0,0,x,0\n";
  }
  try {
    tt::import_external_cir(dir / "bad.csv", tt::ImportFormat::csv_paths);
    FAIL("expected MalformedRow");
  } catch (const tt::Error& e) {
    CHECK(e.code() == Errc::MalformedRow);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  {
    std::ofstream f(dir / "back.csv");
    f << "0.002,0,1,0\n0.001,0,1,0\n";
  }
  CHECK(error_code_of([&] { tt::import_external_cir(dir / "back.csv", tt::ImportFormat::csv_paths); }) ==
        Errc::NonMonotonicTime);
}

}
