// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"
#include "test_util.hpp"
#include "tinytwin/conv_engine.hpp"

using namespace testutil;
using tt::Errc;

TEST_SUITE("conv_engine") {

TEST_CASE("identity tap is a pure copy") {
  std::mt19937_64 rng(1);
  const auto x = random_iq(rng, 256);
  tt::ConvState st(1);
  std::vector<tt::cf32> y(256);
  const std::vector<tt::cf32> h{tt::cf32(1, 0)};
  tt::convolve_full(x, h, st, y);
  CHECK(y == x);
}

TEST_CASE("delay-one tap shifts by one sample across slot boundaries") {
  tt::ConvState st(2);
  const std::vector<tt::cf32> h{tt::cf32(0, 0), tt::cf32(1, 0)};
  std::vector<tt::cf32> a{{1, 0}, {2, 0}, {3, 0}}, b{{4, 0}, {5, 0}, {6, 0}}, ya(3), yb(3);
  tt::convolve_full(a, h, st, ya);
  tt::convolve_full(b, h, st, yb);
  CHECK(ya == std::vector<tt::cf32>{{0, 0}, {1, 0}, {2, 0}});
  CHECK(yb == std::vector<tt::cf32>{{3, 0}, {4, 0}, {5, 0}});
}

TEST_CASE("slot-streamed convolution matches one-shot brute force") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> len(1, 1024), taps(1, 64), slot(1, 300);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = len(rng);
    const auto L = taps(rng);
    const auto x = random_iq(rng, n);
    const auto h = random_iq(rng, L, 0.3f);
    const auto want = brute_convolve(x, h);
    tt::ConvState st(L);
    std::vector<tt::cf32> got;
    for (std::size_t off = 0; off < n;) {
      const auto m = std::min(slot(rng), n - off);
      std::vector<tt::cf32> out(m);
      tt::convolve_full(std::span(x).subspan(off, m), h, st, out);
      got.insert(got.end(), out.begin(), out.end());
      off += m;
    }
    CHECK(rel_rms(got, want) < 1e-5);
  }
}

TEST_CASE("in-place convolution equals out-of-place") {
  std::mt19937_64 rng(8);
  const auto x = random_iq(rng, 500);
  const auto h = random_iq(rng, 17);
  tt::ConvState s1(17), s2(17);
  std::vector<tt::cf32> y(500), inplace = x;
  tt::convolve_full(x, h, s1, y);
  tt::convolve_full(inplace, h, s2, inplace);
  CHECK(y == inplace);
}

TEST_CASE("tap count mismatch is rejected") {
  tt::ConvState st(4);
  std::vector<tt::cf32> x(10), y(10), h(5);
  CHECK(error_code_of([&] { tt::convolve_full(x, h, st, y); }) == Errc::TapLengthMismatch);
}

TEST_CASE("sparse with n = L is bit-identical to dense") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t L = 1 + rng() % 100;
    const auto h = random_iq(rng, L);
    tt::ConvState sd(L), ss(L);
    for (int slot = 0; slot < 3; ++slot) {
      const auto x = random_iq(rng, 300);
      std::vector<tt::cf32> yd(300), ys(300);
      tt::convolve_full(x, h, sd, yd);
      tt::convolve_sparse(x, tt::select_top_n(h, L), ss, ys);
      CHECK(yd == ys);
    }
  }
}

TEST_CASE("sparse error stays under the Young bound") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t L = 2 + rng() % 60;
    const std::size_t n = 1 + rng() % (L - 1);
    const auto h = random_iq(rng, L);
    const auto x = random_iq(rng, 400);
    tt::ConvState sd(L), ss(L);
    std::vector<tt::cf32> yd(400), ys(400);
    tt::convolve_full(x, h, sd, yd);
    const auto sparse = tt::select_top_n(h, n);
    tt::convolve_sparse(x, sparse, ss, ys);
    double omitted = 0;
    std::vector<bool> kept(L);
    for (const auto& e : sparse.entries) kept[e.bin] = true;
    for (std::size_t l = 0; l < L; ++l)
      if (!kept[l]) omitted += std::abs(tt::cf64(h[l]));
    double xnorm = 0, err = 0;
    for (auto v : x) xnorm += std::norm(tt::cf64(v));
    for (std::size_t k = 0; k < 400; ++k) err += std::norm(tt::cf64(yd[k]) - tt::cf64(ys[k]));
    CHECK(std::sqrt(err) <= std::sqrt(xnorm) * omitted * (1 + 1e-5) + 1e-6);
  }
}

TEST_CASE("top-n selection: largest magnitudes, ties to the lower bin, bin order") {
  const std::vector<tt::cf32> h{{0.1f, 0}, {0, 0.9f}, {0.5f, 0}, {-0.5f, 0}, {0.9f, 0}};
  const auto s = tt::select_top_n(h, 3);
  REQUIRE(s.entries.size() == 3);
  CHECK(s.entries[0].bin == 1);
  CHECK(s.entries[1].bin == 2);
  CHECK(s.entries[2].bin == 4);
  CHECK(tt::select_top_n(h, 99).entries.size() == 5);
  CHECK(tt::select_top_n(h, 0).entries.empty());
}

TEST_CASE("IqFrame overload keeps slot metadata") {
  tt::IqFrame f{42, 3, tt::Direction::uplink, {{1, 0}, {2, 0}}};
  tt::ConvState st(1);
  const std::vector<tt::cf32> h{tt::cf32(0, 1)};
  const auto out = tt::convolve_full(f, h, st);
  CHECK(out.slot_index == 42);
  CHECK(out.ue_id == 3);
  CHECK(out.samples[1] == tt::cf32(0, 2));
}

TEST_CASE("slot SNR is channel gain times signal over noise") {
  const std::vector<tt::cf32> h{{1, 0}, {0, 1}};
  CHECK(tt::slot_snr_db(h, 1.0, 0.1) == doctest::Approx(10 * std::log10(20.0)));
  CHECK(error_code_of([&] { tt::slot_snr_db(h, 1.0, 0.0); }) == Errc::NonPositiveNoise);
  CHECK(error_code_of([&] { tt::slot_snr_db(h, 1.0, -1.0); }) == Errc::NonPositiveNoise);
}

TEST_CASE("AWGN: requested power, deterministic per stream, zero is a no-op") {
  std::vector<tt::cf32> a(200000), b(200000);
  const auto seed = tt::awgn_stream_seed(1, 10, 2, tt::Direction::downlink);
  tt::add_awgn(a, 0.25, seed);
  tt::add_awgn(b, 0.25, seed);
  CHECK(a == b);
  double p = 0;
  tt::cf64 mean{};
  for (auto x : a) {
    p += std::norm(tt::cf64(x));
    mean += tt::cf64(x);
  }
  CHECK(p / a.size() == doctest::Approx(0.25).epsilon(0.01));
  CHECK(std::abs(mean / double(a.size())) < 0.005);
  CHECK(tt::awgn_stream_seed(1, 10, 2, tt::Direction::uplink) != seed);
  CHECK(tt::awgn_stream_seed(1, 11, 2, tt::Direction::downlink) != seed);

  std::vector<tt::cf32> z{{1, 1}};
  tt::add_awgn(z, 0.0, seed);
  CHECK(z[0] == tt::cf32(1, 1));
  CHECK(error_code_of([&] { tt::add_awgn(z, -1.0, seed); }) == Errc::InvalidArgument);
}

TEST_CASE("channel filter picks the sparse path from its budget") {
  std::mt19937_64 rng(12);
  const auto h = random_iq(rng, 20);
  const auto x = random_iq(rng, 100);
  tt::ChannelFilter dense(20, 0), full_sparse(20, 20), sparse(20, 3);
  auto a = x, b = x, c = x;
  dense.apply(h, a);
  full_sparse.apply(h, b);
  sparse.apply(h, c);
  CHECK(a == b);
  CHECK(a != c);
}

}
