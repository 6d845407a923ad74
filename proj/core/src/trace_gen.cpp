// SPDX-License-Identifier: Apache-2.0
#include "tinytwin/trace_gen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <string>
#include <string_view>

#include "tinytwin/error.hpp"
#include "tinytwin/rng.hpp"

namespace tinytwin {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Delays within this fraction of a bin are treated as on-grid.
constexpr double kOnGridTolerance = 1e-9;

std::uint32_t steps_for(double duration_s, double time_step_s) {
  if (!(time_step_s > 0.0) || !std::isfinite(time_step_s))
    throw Error(Errc::InvalidArgument, "time step must be positive");
  if (!(duration_s >= time_step_s * (1.0 - 1e-9)))
    throw Error(Errc::InvalidArgument, "duration shorter than one time step");
  const double n = std::llround(duration_s / time_step_s);
  if (n > 0xffffffffu) throw Error(Errc::InvalidArgument, "trace too long");
  return static_cast<std::uint32_t>(std::max(1.0, n));
}

cf32 to_cf32(cf64 v) { return {static_cast<float>(v.real()), static_cast<float>(v.imag())}; }

}  // namespace

double doppler_from_speed(double speed_kmh, double carrier_hz) {
  return speed_kmh / 3.6 * carrier_hz / kSpeedOfLight;
}

std::uint32_t JakesConfig::num_steps() const { return steps_for(duration_s, time_step_s); }

void JakesConfig::validate() const {
  if (!std::isfinite(doppler_hz) || doppler_hz < 0.0)
    throw Error(Errc::InvalidArgument, "doppler must be finite and >= 0");
  if (num_sinusoids < 8) throw Error(Errc::InvalidArgument, "need at least 8 sinusoids");
  if (doppler_hz * time_step_s >= 0.5)
    throw Error(Errc::NyquistViolation, "doppler " + std::to_string(doppler_hz) + " Hz with step " +
                                            std::to_string(time_step_s) + " s aliases the fading process");
  (void)num_steps();
}

std::vector<cf64> gen_jakes_gains(const JakesConfig& cfg) {
  cfg.validate();
  const std::uint32_t n_steps = cfg.num_steps();
  const std::uint32_t m_count = cfg.num_sinusoids;

  Rng rng(cfg.seed);
  std::vector<double> cycles_per_step(m_count);
  std::vector<double> phase(m_count);
  for (std::uint32_t m = 0; m < m_count; ++m) {
    const double alpha = kTwoPi * (m + 0.25) / m_count;
    cycles_per_step[m] = cfg.doppler_hz * std::cos(alpha) * cfg.time_step_s;
    phase[m] = kTwoPi * rng.uniform();
  }

  const double scale = 1.0 / std::sqrt(static_cast<double>(m_count));
  std::vector<cf64> out(n_steps);

  if (cfg.doppler_hz == 0.0) {
    cf64 c{};
    for (double ph : phase) c += std::polar(1.0, ph);
    const double mag = std::abs(c);
    const cf64 unit = mag > 0.0 ? c / mag : cf64{1.0, 0.0};
    std::fill(out.begin(), out.end(), unit);
    return out;
  }

  for (std::uint32_t n = 0; n < n_steps; ++n) {
    cf64 acc{};
    for (std::uint32_t m = 0; m < m_count; ++m) {
      // Reduce the cycle count first so the angle stays accurate for long traces.
      double cyc = cycles_per_step[m] * n;
      cyc -= std::floor(cyc);
      const double theta = kTwoPi * cyc + phase[m];
      acc += cf64(std::cos(theta), std::sin(theta));
    }
    out[n] = acc * scale;
  }
  return out;
}

std::vector<cf64> resample_paths(const PathList& paths, const DelayGrid& grid) {
  grid.validate();
  const std::uint32_t L = grid.num_bins;
  std::vector<cf64> taps(L);
  for (const Path& p : paths) {
    if (!std::isfinite(p.delay_ns) || p.delay_ns < 0.0)
      throw Error(Errc::InvalidArgument, "path delay must be finite and >= 0");
    if (!std::isfinite(p.gain.real()) || !std::isfinite(p.gain.imag()))
      throw Error(Errc::InvalidArgument, "path gain must be finite");

    const double pos = p.delay_ns / grid.bin_spacing_ns;
    if (pos > (L - 1) + kOnGridTolerance)
      throw Error(Errc::GridTooShort, "delay " + std::to_string(p.delay_ns) + " ns needs more than " +
                                          std::to_string(L) + " bins");
    const double base = std::floor(pos);
    const double frac = pos - base;
    const auto i = static_cast<std::uint32_t>(base);
    if (frac <= kOnGridTolerance) {
      taps[i] += p.gain;
    } else if (frac >= 1.0 - kOnGridTolerance) {
      taps[i + 1] += p.gain;
    } else {
      taps[i] += (1.0 - frac) * p.gain;
      taps[i + 1] += frac * p.gain;
    }
  }
  return taps;
}

CirTrace build_3gpp_trace(const PdpProfile& profile, const DelayGrid& grid, double duration_s,
                          std::uint64_t seed, const TraceOptions& opts) {
  PdpProfile pdp = profile;
  pdp.normalize();
  grid.validate();
  const std::uint32_t L = grid.num_bins;
  const std::size_t n_paths = pdp.path_delays_ns.size();
  const auto powers = pdp.linear_powers();

  // Per-path bin weights, renormalised so each path keeps its expected power.
  std::vector<std::vector<cf64>> weights(n_paths);
  for (std::size_t k = 0; k < n_paths; ++k) {
    auto w = resample_paths({Path{pdp.path_delays_ns[k], cf64{1.0, 0.0}}}, grid);
    double energy = 0.0;
    for (const auto& x : w) energy += std::norm(x);
    const double amp = std::sqrt(powers[k] / energy);
    for (auto& x : w) x *= amp;
    weights[k] = std::move(w);
  }

  JakesConfig jc{pdp.doppler_hz, opts.num_sinusoids, 0, duration_s, opts.time_step_s};
  jc.validate();
  const std::uint32_t n_steps = jc.num_steps();

  std::vector<cf64> acc(std::size_t{n_steps} * L);
  for (std::size_t k = 0; k < n_paths; ++k) {
    jc.seed = derive_seed({seed, k});
    const auto gains = gen_jakes_gains(jc);
    for (std::uint32_t b = 0; b < L; ++b) {
      const cf64 w = weights[k][b];
      if (w == cf64{}) continue;
      for (std::uint32_t n = 0; n < n_steps; ++n) acc[std::size_t{n} * L + b] += w * gains[n];
    }
  }

  CirTrace t;
  t.grid = grid;
  t.time_step_us = opts.time_step_s * 1e6;
  t.num_steps = n_steps;
  t.taps.resize(acc.size());
  std::transform(acc.begin(), acc.end(), t.taps.begin(), to_cf32);
  t.carrier_freq_hz = opts.carrier_hz;
  t.label = pdp.name;
  t.validate();
  return t;
}

CirTrace gen_periodic_snr_trace(double period_s, double snr_high_db, double snr_low_db, double duration_s,
                                const DelayGrid& grid, const TraceOptions& opts) {
  if (!(period_s > 0.0) || !std::isfinite(period_s)) throw Error(Errc::InvalidArgument, "period must be > 0");
  if (!(duration_s >= period_s)) throw Error(Errc::InvalidArgument, "duration must cover one period");
  if (!std::isfinite(snr_high_db) || !std::isfinite(snr_low_db))
    throw Error(Errc::InvalidArgument, "snr bounds must be finite");
  grid.validate();
  const std::uint32_t n_steps = steps_for(duration_s, opts.time_step_s);

  // Work in step counts so period boundaries land exactly.
  double steps_per_period = period_s / opts.time_step_s;
  if (std::abs(steps_per_period - std::round(steps_per_period)) < 1e-6)
    steps_per_period = std::round(steps_per_period);
  const double swing_db = snr_high_db - snr_low_db;

  CirTrace t;
  t.grid = grid;
  t.time_step_us = opts.time_step_s * 1e6;
  t.num_steps = n_steps;
  t.taps.assign(std::size_t{n_steps} * grid.num_bins, cf32{});
  for (std::uint32_t n = 0; n < n_steps; ++n) {
    const double frac = std::fmod(static_cast<double>(n), steps_per_period) / steps_per_period;
    const double gain_db = -swing_db * frac;
    t.taps[std::size_t{n} * grid.num_bins] = cf32(static_cast<float>(std::pow(10.0, gain_db / 20.0)), 0.0f);
  }
  t.carrier_freq_hz = opts.carrier_hz;
  t.label = "periodic-snr " + std::to_string(snr_high_db) + ":" + std::to_string(snr_low_db) + " dB";
  t.validate();
  return t;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end && std::isfinite(out);
}

struct CsvRow {
  double time_s, delay_ns, re, im;
};

}  // namespace

CirTrace import_external_cir(const std::filesystem::path& path, ImportFormat format, const ImportOptions& opts) {
  if (format == ImportFormat::cirt) return load_trace(path);

  std::ifstream in(path);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  if (!(opts.time_step_s > 0.0)) throw Error(Errc::InvalidArgument, "time step must be positive");

  std::vector<std::pair<std::uint64_t, Path>> rows;
  std::string line;
  std::size_t line_no = 0;
  bool seen_data = false;
  double first_time = 0.0;
  double last_time = 0.0;
  double max_delay = 0.0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = trim(line);
    if (view.empty() || view.front() == '#') continue;

    double fields[4];
    std::size_t count = 0;
    bool ok = true;
    std::string_view rest = view;
    while (ok) {
      const auto comma = rest.find(',');
      const auto tok = rest.substr(0, comma);
      if (count == 4 || !parse_double(tok, fields[count])) ok = false;
      ++count;
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (!ok || count != 4) {
      const bool header = !seen_data && rows.empty() &&
                          std::isalpha(static_cast<unsigned char>(view.front()));
      if (header) continue;
      throw Error(Errc::MalformedRow, path.string() + " line " + std::to_string(line_no));
    }
    const CsvRow r{fields[0], fields[1], fields[2], fields[3]};
    if (r.delay_ns < 0.0) throw Error(Errc::MalformedRow, path.string() + " line " + std::to_string(line_no) +
                                                              ": negative delay");
    if (!seen_data) {
      first_time = last_time = r.time_s;
      seen_data = true;
    }
    if (r.time_s < last_time)
      throw Error(Errc::NonMonotonicTime, path.string() + " line " + std::to_string(line_no));
    last_time = r.time_s;
    const auto step = static_cast<std::uint64_t>(std::llround((r.time_s - first_time) / opts.time_step_s));
    rows.push_back({step, Path{r.delay_ns, cf64{r.re, r.im}}});
    max_delay = std::max(max_delay, r.delay_ns);
  }
  if (rows.empty()) throw Error(Errc::MalformedRow, path.string() + ": no data rows");

  std::uint32_t L = opts.num_bins;
  const double spacing = 1e9 / opts.sample_rate_hz;
  if (L == 0) {
    const double pos = max_delay / spacing;
    L = static_cast<std::uint32_t>(std::ceil(pos - kOnGridTolerance)) + 1;
  }
  const auto grid = DelayGrid::from_sample_rate(opts.sample_rate_hz, L);

  const std::uint64_t n_steps = rows.back().first + 1;
  if (n_steps > 0xffffffffu) throw Error(Errc::InvalidArgument, "imported trace too long");

  CirTrace t;
  t.grid = grid;
  t.time_step_us = opts.time_step_s * 1e6;
  t.num_steps = static_cast<std::uint32_t>(n_steps);
  t.taps.assign(n_steps * L, cf32{});
  t.carrier_freq_hz = opts.carrier_hz;
  t.label = opts.label;

  std::size_t i = 0;
  for (std::uint64_t s = 0; s < n_steps; ++s) {
    PathList step_paths;
    while (i < rows.size() && rows[i].first == s) step_paths.push_back(rows[i++].second);
    auto dst = t.taps.begin() + static_cast<std::ptrdiff_t>(s * L);
    if (step_paths.empty()) {
      std::copy_n(dst - L, L, dst);  // hold last value across gaps
      continue;
    }
    const auto taps = resample_paths(step_paths, grid);
    std::transform(taps.begin(), taps.end(), dst, to_cf32);
  }
  t.validate();
  return t;
}

}  // namespace tinytwin

namespace tinytwin {

std::vector<std::filesystem::path> profile_search_path() {
  std::vector<std::filesystem::path> dirs;
  if (const char* env = std::getenv("TINYTWIN_PROFILE_DIR"); env && *env) dirs.emplace_back(env);
  // Installed layout: <prefix>/bin/tinytwin next to <prefix>/share/tinytwin/profiles.
  std::error_code ec;
  const auto exe = std::filesystem::read_symlink("/proc/self/exe", ec);
  if (!ec) dirs.push_back(exe.parent_path().parent_path() / "share" / "tinytwin" / "profiles");
  dirs.emplace_back(TINYTWIN_INSTALL_PROFILE_DIR);
  dirs.emplace_back(TINYTWIN_SOURCE_PROFILE_DIR);
  return dirs;
}

PdpProfile builtin_profile(const std::string& name) {
  if (name.empty() || name.find_first_of("/\\") != std::string::npos || name.front() == '.')
    throw Error(Errc::InvalidArgument, "bad profile name '" + name + "'");
  std::string searched;
  for (const auto& dir : profile_search_path()) {
    const auto file = dir / (name + ".json");
    std::error_code ec;
    if (std::filesystem::is_regular_file(file, ec)) return PdpProfile::load_json(file);
    searched += (searched.empty() ? "" : ", ") + dir.string();
  }
  throw Error(Errc::InvalidArgument, "unknown profile '" + name + "' (searched " + searched + ")");
}

std::vector<std::string> builtin_profile_names() {
  std::set<std::string> names;
  for (const auto& dir : profile_search_path()) {
    std::error_code ec;
    for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
      if (entry.path().extension() == ".json") names.insert(entry.path().stem().string());
    }
  }
  return {names.begin(), names.end()};
}

DelayGrid grid_for_profile(const PdpProfile& pdp, double sample_rate_hz) {
  if (!(sample_rate_hz > 0)) throw Error(Errc::InvalidArgument, "sample rate must be positive");
  const double spacing = 1e9 / sample_rate_hz;
  double max_delay = 0.0;
  for (double d : pdp.path_delays_ns) max_delay = std::max(max_delay, d);
  const auto bins = static_cast<std::uint32_t>(std::ceil(max_delay / spacing - 1e-9)) + 1;
  return DelayGrid::from_sample_rate(sample_rate_hz, bins);
}

}  // namespace tinytwin
