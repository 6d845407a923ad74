// SPDX-License-Identifier: Apache-2.0
//
// Streaming time-varying FIR convolution of IQ slots against CIR taps.
//
// Output sample k of a slot is sum_l h[l] * xt[k - l], where xt is the slot
// prefixed with the last L-1 samples of the previous slot (ConvState). Taps
// are constant within a slot. Contributions are accumulated in ascending bin
// order in both the dense and sparse paths, so a sparse kernel holding every
// tap reproduces the dense output bit for bit.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tinytwin/chan_model.hpp"

namespace tinytwin {

enum class Direction : std::uint8_t { downlink = 0, uplink = 1 };

struct IqFrame {
  std::uint64_t slot_index = 0;
  std::uint32_t ue_id = 0;
  Direction direction = Direction::downlink;
  std::vector<cf32> samples;
};

/// Carries the last L-1 input samples across slot boundaries.
class ConvState {
 public:
  explicit ConvState(std::size_t num_taps = 1);

  std::size_t num_taps() const { return tail_.size() + 1; }
  std::span<const cf32> tail() const { return tail_; }
  void reset();

 private:
  friend class ConvKernel;
  std::vector<cf32> tail_;
  std::vector<cf32> scratch_;
};

struct SparseTap {
  std::uint32_t bin = 0;
  cf32 gain{};
  friend bool operator==(const SparseTap&, const SparseTap&) = default;
};

/// Top-n taps of one step, ordered by ascending bin.
struct SparseTaps {
  std::vector<SparseTap> entries;
};

/// Largest-|gain| min(n, L) taps; equal magnitudes favour the smaller bin.
SparseTaps select_top_n(std::span<const cf32> taps, std::size_t n);

/// Dense convolution. `out` may alias `in`; both must have the same length.
/// Throws TapLengthMismatch if the state was sized for a different L.
void convolve_full(std::span<const cf32> in, std::span<const cf32> taps, ConvState& state, std::span<cf32> out);
IqFrame convolve_full(const IqFrame& frame, std::span<const cf32> taps, ConvState& state);

/// Sparse convolution; the state keeps the full L-1 tail so that switching
/// between sparse and dense mid-stream stays consistent.
void convolve_sparse(std::span<const cf32> in, const SparseTaps& sparse, ConvState& state, std::span<cf32> out);
IqFrame convolve_sparse(const IqFrame& frame, const SparseTaps& sparse, ConvState& state);

/// Channel-defined SNR: (sum |h_l|^2) * P_sig / P_noise in dB. Throws
/// NonPositiveNoise when noise_power <= 0.
double slot_snr_db(std::span<const cf32> taps, double signal_power, double noise_power);

/// Adds circularly symmetric Gaussian noise of `noise_power` per complex sample,
/// seeded from (seed, slot_index, ue_id, direction).
void add_awgn(IqFrame& frame, double noise_power, std::uint64_t seed);
void add_awgn(std::span<cf32> samples, double noise_power, std::uint64_t stream_seed);
std::uint64_t awgn_stream_seed(std::uint64_t seed, std::uint64_t slot_index, std::uint32_t ue_id, Direction dir);

/// Per-stream channel applicator: picks dense or sparse convolution from the
/// sparse budget (0 = dense) and owns the stream's state.
class ChannelFilter {
 public:
  ChannelFilter(std::size_t num_taps, std::size_t sparse_n);

  void apply(std::span<const cf32> taps, std::span<cf32> samples);
  const ConvState& state() const { return state_; }
  std::size_t sparse_n() const { return sparse_n_; }

 private:
  ConvState state_;
  std::size_t sparse_n_;
  SparseTaps sparse_;
};

}  // namespace tinytwin
