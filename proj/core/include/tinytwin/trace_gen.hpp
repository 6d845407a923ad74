// SPDX-License-Identifier: Apache-2.0
//
// Trace synthesis and import: Jakes sum-of-sinusoids fading, PDP-driven
// multipath traces, periodic SNR sweeps, and continuous-delay resampling.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tinytwin/chan_model.hpp"

namespace tinytwin {

inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kDefaultCarrierHz = 3.5e9;

/// f_d = v * f_c / c.
double doppler_from_speed(double speed_kmh, double carrier_hz = kDefaultCarrierHz);

struct JakesConfig {
  double doppler_hz = 0.0;
  std::uint32_t num_sinusoids = 32;
  std::uint64_t seed = 0;
  double duration_s = 1.0;
  double time_step_s = 1e-3;

  std::uint32_t num_steps() const;
  /// Throws NyquistViolation if doppler * time_step >= 0.5.
  void validate() const;
};

/// Unit-mean-power Rayleigh fading sequence, one complex gain per time step.
///
/// Sum of M sinusoids with arrival angles 2*pi*(m + 1/4)/M and independent
/// uniform phases. The quarter offset keeps every Doppler frequency distinct,
/// so time-averaged power converges to 1 and the autocorrelation converges to
/// J0(2*pi*f_d*tau). With zero Doppler the process is a constant; it is
/// scaled to unit magnitude, keeping its random phase.
std::vector<cf64> gen_jakes_gains(const JakesConfig& cfg);

struct Path {
  double delay_ns = 0.0;
  cf64 gain{};
};
using PathList = std::vector<Path>;

/// Places each path on the grid by splitting its gain linearly between the two
/// neighbouring bins. Weights sum to one, so total complex gain and the
/// gain-weighted first delay moment are preserved.
std::vector<cf64> resample_paths(const PathList& paths, const DelayGrid& grid);

struct TraceOptions {
  double time_step_s = 1e-3;
  std::uint32_t num_sinusoids = 32;
  double carrier_hz = kDefaultCarrierHz;
};

/// Every PDP path fades independently (seed derived from (seed, path index))
/// with expected power equal to its profile power, then lands on the grid.
/// Off-grid paths are renormalised after the two-bin split so the split does
/// not change their expected power.
CirTrace build_3gpp_trace(const PdpProfile& pdp, const DelayGrid& grid, double duration_s,
                          std::uint64_t seed, const TraceOptions& opts = {});

/// Single-tap trace at bin 0 whose power falls linearly in dB from 0 dB
/// (snr_high) to snr_low - snr_high over each period, then restarts.
CirTrace gen_periodic_snr_trace(double period_s, double snr_high_db, double snr_low_db,
                                double duration_s, const DelayGrid& grid,
                                const TraceOptions& opts = {});

/// Directories searched for named profiles, in order: $TINYTWIN_PROFILE_DIR,
/// share/tinytwin/profiles next to the running binary, the install prefix,
/// then the source tree's profiles/.
std::vector<std::filesystem::path> profile_search_path();

/// Loads `<name>.json` from the first directory on the search path that has
/// it. Shipped: "uma" (TDL-C, 300 ns delay spread), "umi" (TDL-A, 100 ns),
/// "rma" (TDL-A, 30 ns). Returned normalised; files must list taps by delay.
PdpProfile builtin_profile(const std::string& name);
/// Every profile name visible on the search path, sorted.
std::vector<std::string> builtin_profile_names();

/// Smallest grid at `sample_rate_hz` whose last bin reaches the largest delay.
DelayGrid grid_for_profile(const PdpProfile& pdp, double sample_rate_hz);

enum class ImportFormat { csv_paths, cirt };

struct ImportOptions {
  double sample_rate_hz = 1.92e6;
  /// 0 picks the smallest grid covering every imported delay.
  std::uint32_t num_bins = 0;
  double time_step_s = 1e-3;
  double carrier_hz = kDefaultCarrierHz;
  std::string label = "imported";
};

/// csv-paths rows are `time_s,delay_ns,re,im`. Blank lines and `#` comments are
/// skipped and an optional header row is allowed. Rows are grouped by nearest
/// time step relative to the first row; steps without rows hold the previous
/// step's taps.
CirTrace import_external_cir(const std::filesystem::path& path, ImportFormat format,
                             const ImportOptions& opts = {});

}  // namespace tinytwin
