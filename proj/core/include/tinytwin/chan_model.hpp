// SPDX-License-Identifier: Apache-2.0
//
// Channel impulse response containers and the CIRT trace file format.
//
// A CIRT file is little-endian:
//
//   offset  size  field
//   0       4     magic "CIRT"
//   4       2     version (1)
//   6       2     flags (0)
//   8       4     num_steps
//   12      4     num_bins
//   16      8     bin_spacing_ns (f64)
//   24      8     time_step_us (f64)
//   32      8     carrier_freq_hz (f64)
//   40      2     label_len
//   42      n     label (UTF-8)
//   42+n    ...   num_steps * num_bins * (f32 re, f32 im), step-major
#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace tinytwin {

using cf32 = std::complex<float>;
using cf64 = std::complex<double>;

inline constexpr char kCirtMagic[4] = {'C', 'I', 'R', 'T'};
inline constexpr std::uint16_t kCirtVersion = 1;
inline constexpr std::size_t kCirtFixedHeaderSize = 42;

/// Uniform delay grid; one bin is one IQ sample period.
struct DelayGrid {
  std::uint32_t num_bins = 1;
  double bin_spacing_ns = 0.0;
  double sample_rate_hz = 0.0;

  static DelayGrid from_sample_rate(double sample_rate_hz, std::uint32_t num_bins);
  /// Rebuilds the grid from a stored spacing (the file only carries spacing).
  static DelayGrid from_spacing(double bin_spacing_ns, std::uint32_t num_bins);

  /// Throws Errc::InvalidArgument if any invariant is broken.
  void validate() const;
  double span_ns() const { return num_bins * bin_spacing_ns; }

  /// The sample rate is derived from the spacing, so it takes no part here.
  friend bool operator==(const DelayGrid& a, const DelayGrid& b) {
    return a.num_bins == b.num_bins && a.bin_spacing_ns == b.bin_spacing_ns;
  }
};

/// Time-indexed grid of complex taps (num_steps x num_bins, step-major).
/// Shared read-only between workers once built.
struct CirTrace {
  DelayGrid grid{};
  double time_step_us = 1000.0;
  std::uint32_t num_steps = 0;
  std::vector<cf32> taps;
  double carrier_freq_hz = 0.0;
  std::string label;

  std::uint32_t num_bins() const { return grid.num_bins; }

  /// Taps for a replay step; wraps modulo num_steps.
  std::span<const cf32> step(std::uint64_t s) const {
    const auto idx = static_cast<std::size_t>(s % num_steps);
    return std::span<const cf32>(taps).subspan(idx * grid.num_bins, grid.num_bins);
  }

  /// Throws NonFiniteTap (with the offending flat index) or InvalidArgument.
  void validate() const;

  friend bool operator==(const CirTrace&, const CirTrace&) = default;
};

/// Power delay profile: path delays (ns) with relative powers.
struct PdpProfile {
  std::string name;
  std::vector<double> path_delays_ns;
  std::vector<double> path_powers_db;
  double doppler_hz = 0.0;

  /// Validates sorting/lengths and rescales powers so linear powers sum to 1.
  void normalize();
  std::vector<double> linear_powers() const;

  /// Loads {name, delays_ns, powers_db} JSON. Returned profile is normalized.
  static PdpProfile load_json(const std::filesystem::path& path);
};

CirTrace load_trace(const std::filesystem::path& path);
CirTrace parse_trace(std::span<const std::byte> bytes);
void write_trace(const CirTrace& trace, const std::filesystem::path& path);
std::vector<std::byte> serialize_trace(const CirTrace& trace);
/// Writes `<stem>.meta.json` next to the trace mirroring the header.
void write_trace_sidecar(const CirTrace& trace, const std::filesystem::path& trace_path,
                         double doppler_hz);

double step_power(std::span<const cf32> taps);
/// 10*log10(sum |h_l|^2) for a step in [0, num_steps).
double tap_power_db(const CirTrace& trace, std::uint32_t step);

}  // namespace tinytwin
