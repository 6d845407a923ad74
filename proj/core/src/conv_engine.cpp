// SPDX-License-Identifier: Apache-2.0
#include "tinytwin/conv_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tinytwin/error.hpp"
#include "tinytwin/rng.hpp"

namespace tinytwin {

ConvState::ConvState(std::size_t num_taps) {
  if (num_taps == 0) throw Error(Errc::TapLengthMismatch, "state needs at least one tap");
  tail_.assign(num_taps - 1, cf32{});
}

void ConvState::reset() { std::fill(tail_.begin(), tail_.end(), cf32{}); }

// Shared machinery for the dense and sparse paths: stage the extended input,
// accumulate, and roll the tail forward.
class ConvKernel {
 public:
  static std::span<const cf32> stage(ConvState& st, std::span<const cf32> in) {
    const std::size_t h = st.tail_.size();
    st.scratch_.resize(h + in.size());
    std::copy(st.tail_.begin(), st.tail_.end(), st.scratch_.begin());
    std::copy(in.begin(), in.end(), st.scratch_.begin() + static_cast<std::ptrdiff_t>(h));
    return st.scratch_;
  }

  static void roll(ConvState& st) {
    const std::size_t h = st.tail_.size();
    std::copy(st.scratch_.end() - static_cast<std::ptrdiff_t>(h), st.scratch_.end(), st.tail_.begin());
  }

  // out[k] += g * xt[k + hist - bin]; explicit real arithmetic keeps the loop
  // free of the complex-multiply NaN fallback and lets it vectorize.
  static void mac(std::span<const cf32> xt, std::size_t hist, std::uint32_t bin, cf32 g, std::span<cf32> out) {
    const float gr = g.real();
    const float gi = g.imag();
    const float* __restrict x = reinterpret_cast<const float*>(xt.data() + (hist - bin));
    float* __restrict y = reinterpret_cast<float*>(out.data());
    const std::size_t n = out.size();
    for (std::size_t k = 0; k < n; ++k) {
      const float xr = x[2 * k];
      const float xi = x[2 * k + 1];
      y[2 * k] += gr * xr - gi * xi;
      y[2 * k + 1] += gr * xi + gi * xr;
    }
  }
};

namespace {

void check_sizes(std::span<const cf32> in, std::span<cf32> out) {
  if (in.size() != out.size())
    throw Error(Errc::InvalidArgument, "input and output lengths differ");
}

}  // namespace

void convolve_full(std::span<const cf32> in, std::span<const cf32> taps, ConvState& state, std::span<cf32> out) {
  check_sizes(in, out);
  if (taps.size() != state.num_taps())
    throw Error(Errc::TapLengthMismatch,
                "state holds " + std::to_string(state.num_taps()) + " taps, got " + std::to_string(taps.size()));
  const auto xt = ConvKernel::stage(state, in);
  const std::size_t hist = taps.size() - 1;
  std::fill(out.begin(), out.end(), cf32{});
  for (std::size_t l = 0; l < taps.size(); ++l)
    ConvKernel::mac(xt, hist, static_cast<std::uint32_t>(l), taps[l], out);
  ConvKernel::roll(state);
}

IqFrame convolve_full(const IqFrame& frame, std::span<const cf32> taps, ConvState& state) {
  IqFrame out{frame.slot_index, frame.ue_id, frame.direction, std::vector<cf32>(frame.samples.size())};
  convolve_full(frame.samples, taps, state, out.samples);
  return out;
}

SparseTaps select_top_n(std::span<const cf32> taps, std::size_t n) {
  std::vector<std::uint32_t> order(taps.size());
  std::iota(order.begin(), order.end(), 0u);
  const std::size_t keep = std::min(n, taps.size());
  // norm() is exact enough to rank; stable ordering resolves ties to lower bins.
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return std::norm(taps[a]) > std::norm(taps[b]); });
  order.resize(keep);
  std::sort(order.begin(), order.end());
  SparseTaps s;
  s.entries.reserve(keep);
  for (auto bin : order) s.entries.push_back({bin, taps[bin]});
  return s;
}

void convolve_sparse(std::span<const cf32> in, const SparseTaps& sparse, ConvState& state, std::span<cf32> out) {
  check_sizes(in, out);
  for (const auto& e : sparse.entries)
    if (e.bin >= state.num_taps())
      throw Error(Errc::TapLengthMismatch, "sparse bin " + std::to_string(e.bin) + " outside state of " +
                                               std::to_string(state.num_taps()) + " taps");
  const auto xt = ConvKernel::stage(state, in);
  const std::size_t hist = state.num_taps() - 1;
  std::fill(out.begin(), out.end(), cf32{});
  for (const auto& e : sparse.entries) ConvKernel::mac(xt, hist, e.bin, e.gain, out);
  ConvKernel::roll(state);
}

IqFrame convolve_sparse(const IqFrame& frame, const SparseTaps& sparse, ConvState& state) {
  IqFrame out{frame.slot_index, frame.ue_id, frame.direction, std::vector<cf32>(frame.samples.size())};
  convolve_sparse(frame.samples, sparse, state, out.samples);
  return out;
}

double slot_snr_db(std::span<const cf32> taps, double signal_power, double noise_power) {
  if (!(noise_power > 0.0)) throw Error(Errc::NonPositiveNoise, "noise power must be > 0");
  return 10.0 * std::log10(step_power(taps) * signal_power / noise_power);
}

std::uint64_t awgn_stream_seed(std::uint64_t seed, std::uint64_t slot_index, std::uint32_t ue_id, Direction dir) {
  return derive_seed({seed, slot_index, ue_id, static_cast<std::uint64_t>(dir)});
}

void add_awgn(std::span<cf32> samples, double noise_power, std::uint64_t stream_seed) {
  if (!(noise_power >= 0.0)) throw Error(Errc::InvalidArgument, "noise power must be >= 0");
  if (noise_power == 0.0) return;
  Rng rng(stream_seed);
  const double sigma = std::sqrt(noise_power / 2.0);
  for (auto& s : samples) {
    const double nr = rng.normal() * sigma;
    const double ni = rng.normal() * sigma;
    s += cf32(static_cast<float>(nr), static_cast<float>(ni));
  }
}

void add_awgn(IqFrame& frame, double noise_power, std::uint64_t seed) {
  add_awgn(frame.samples, noise_power, awgn_stream_seed(seed, frame.slot_index, frame.ue_id, frame.direction));
}

ChannelFilter::ChannelFilter(std::size_t num_taps, std::size_t sparse_n)
    : state_(num_taps), sparse_n_(sparse_n) {}

void ChannelFilter::apply(std::span<const cf32> taps, std::span<cf32> samples) {
  if (sparse_n_ == 0 || sparse_n_ >= taps.size()) {
    convolve_full(samples, taps, state_, samples);
    return;
  }
  sparse_ = select_top_n(taps, sparse_n_);
  convolve_sparse(samples, sparse_, state_, samples);
}

}  // namespace tinytwin
