// SPDX-License-Identifier: Apache-2.0
#include "tinytwin/chan_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "byte_io.hpp"
#include "tinytwin/error.hpp"

namespace tinytwin {

using detail::load_le;
using detail::put_le;

DelayGrid DelayGrid::from_sample_rate(double sample_rate_hz, std::uint32_t num_bins) {
  DelayGrid g{num_bins, 1e9 / sample_rate_hz, sample_rate_hz};
  g.validate();
  return g;
}

DelayGrid DelayGrid::from_spacing(double bin_spacing_ns, std::uint32_t num_bins) {
  DelayGrid g{num_bins, bin_spacing_ns, 1e9 / bin_spacing_ns};
  g.validate();
  return g;
}

void DelayGrid::validate() const {
  if (num_bins < 1) throw Error(Errc::InvalidArgument, "delay grid needs at least one bin");
  if (!(bin_spacing_ns > 0.0) || !std::isfinite(bin_spacing_ns))
    throw Error(Errc::InvalidArgument, "bin spacing must be positive");
  if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz))
    throw Error(Errc::InvalidArgument, "sample rate must be positive");
  // spacing and rate are each rounded once from the other; allow a few ulps.
  const double product = bin_spacing_ns * 1e-9 * sample_rate_hz;
  if (std::abs(product - 1.0) > 4.0 * std::numeric_limits<double>::epsilon())
    throw Error(Errc::InvalidArgument, "bin spacing must equal one sample period");
}

void CirTrace::validate() const {
  grid.validate();
  if (num_steps < 1) throw Error(Errc::InvalidArgument, "trace needs at least one step");
  if (!(time_step_us > 0.0) || !std::isfinite(time_step_us))
    throw Error(Errc::InvalidArgument, "time step must be positive");
  if (!std::isfinite(carrier_freq_hz) || carrier_freq_hz < 0.0)
    throw Error(Errc::InvalidArgument, "carrier frequency must be finite and non-negative");
  if (label.size() > std::numeric_limits<std::uint16_t>::max())
    throw Error(Errc::InvalidArgument, "label longer than 65535 bytes");
  if (taps.size() != std::size_t{num_steps} * grid.num_bins)
    throw Error(Errc::InvalidArgument, "tap array size " + std::to_string(taps.size()) +
                                           " != num_steps * num_bins");
  for (std::size_t i = 0; i < taps.size(); ++i) {
    if (!std::isfinite(taps[i].real()) || !std::isfinite(taps[i].imag()))
      throw Error(Errc::NonFiniteTap, "tap " + std::to_string(i) + " is not finite");
  }
}

std::vector<double> PdpProfile::linear_powers() const {
  std::vector<double> p(path_powers_db.size());
  std::transform(path_powers_db.begin(), path_powers_db.end(), p.begin(),
                 [](double db) { return std::pow(10.0, db / 10.0); });
  return p;
}

void PdpProfile::normalize() {
  if (path_delays_ns.empty() || path_delays_ns.size() != path_powers_db.size())
    throw Error(Errc::InvalidArgument, "profile '" + name + "' needs equal-length, non-empty delay/power lists");
  if (!std::is_sorted(path_delays_ns.begin(), path_delays_ns.end()))
    throw Error(Errc::InvalidArgument, "profile '" + name + "' delays must be sorted");
  for (double d : path_delays_ns)
    if (!std::isfinite(d) || d < 0.0) throw Error(Errc::InvalidArgument, "profile delays must be >= 0");
  for (double p : path_powers_db)
    if (!std::isfinite(p)) throw Error(Errc::InvalidArgument, "profile powers must be finite");
  if (!std::isfinite(doppler_hz) || doppler_hz < 0.0)
    throw Error(Errc::InvalidArgument, "doppler must be >= 0");

  const auto lin = linear_powers();
  const double total_db = 10.0 * std::log10(std::accumulate(lin.begin(), lin.end(), 0.0));
  for (double& p : path_powers_db) p -= total_db;
}

PdpProfile PdpProfile::load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoFailure, "cannot open profile " + path.string());
  PdpProfile pdp;
  try {
    const auto doc = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
    pdp.name = doc.at("name").get<std::string>();
    pdp.path_delays_ns = doc.at("delays_ns").get<std::vector<double>>();
    pdp.path_powers_db = doc.at("powers_db").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, path.string() + ": " + e.what());
  }
  pdp.normalize();
  return pdp;
}

std::vector<std::byte> serialize_trace(const CirTrace& trace) {
  trace.validate();
  std::vector<std::byte> out;
  out.reserve(kCirtFixedHeaderSize + trace.label.size() + trace.taps.size() * 8);
  for (char c : kCirtMagic) out.push_back(static_cast<std::byte>(c));
  put_le<std::uint16_t>(out, kCirtVersion);
  put_le<std::uint16_t>(out, 0);
  put_le<std::uint32_t>(out, trace.num_steps);
  put_le<std::uint32_t>(out, trace.grid.num_bins);
  put_le<double>(out, trace.grid.bin_spacing_ns);
  put_le<double>(out, trace.time_step_us);
  put_le<double>(out, trace.carrier_freq_hz);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(trace.label.size()));
  for (char c : trace.label) out.push_back(static_cast<std::byte>(c));
  for (const cf32& t : trace.taps) {
    put_le<float>(out, t.real());
    put_le<float>(out, t.imag());
  }
  return out;
}

void write_trace(const CirTrace& trace, const std::filesystem::path& path) {
  const auto bytes = serialize_trace(trace);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw Error(Errc::IoFailure, "short write to " + path.string());
}

namespace {

[[noreturn]] void fail_at(Errc code, std::size_t offset, const std::string& what) {
  throw Error(code, what + " at byte offset " + std::to_string(offset));
}

}  // namespace

CirTrace parse_trace(std::span<const std::byte> bytes) {
  if (bytes.size() < 4) fail_at(Errc::Truncated, bytes.size(), "file shorter than magic");
  for (std::size_t i = 0; i < 4; ++i)
    if (bytes[i] != static_cast<std::byte>(kCirtMagic[i])) fail_at(Errc::BadMagic, i, "magic is not CIRT");
  if (bytes.size() < kCirtFixedHeaderSize) fail_at(Errc::Truncated, bytes.size(), "header cut short");

  const std::byte* p = bytes.data();
  const auto version = load_le<std::uint16_t>(p + 4);
  if (version != kCirtVersion) fail_at(Errc::UnsupportedVersion, 4, "version " + std::to_string(version));
  const auto flags = load_le<std::uint16_t>(p + 6);
  if (flags != 0) fail_at(Errc::UnsupportedVersion, 6, "unknown flags " + std::to_string(flags));

  CirTrace t;
  t.num_steps = load_le<std::uint32_t>(p + 8);
  const auto num_bins = load_le<std::uint32_t>(p + 12);
  const auto spacing = load_le<double>(p + 16);
  t.time_step_us = load_le<double>(p + 24);
  t.carrier_freq_hz = load_le<double>(p + 32);
  const auto label_len = load_le<std::uint16_t>(p + 40);

  if (num_bins == 0) fail_at(Errc::Truncated, 12, "num_bins is zero");
  if (t.num_steps == 0) fail_at(Errc::Truncated, 8, "num_steps is zero");
  try {
    t.grid = DelayGrid::from_spacing(spacing, num_bins);
  } catch (const Error& e) {
    fail_at(Errc::UnsupportedVersion, 16, e.what());
  }

  std::size_t off = kCirtFixedHeaderSize;
  if (bytes.size() < off + label_len) fail_at(Errc::Truncated, bytes.size(), "label cut short");
  t.label.assign(reinterpret_cast<const char*>(p + off), label_len);
  off += label_len;

  const std::uint64_t count = std::uint64_t{t.num_steps} * num_bins;
  const std::uint64_t need = count * 8;
  if (bytes.size() - off < need)
    fail_at(Errc::Truncated, bytes.size(),
            "payload needs " + std::to_string(need) + " bytes, have " + std::to_string(bytes.size() - off));
  if (bytes.size() - off > need) fail_at(Errc::Truncated, off + need, "trailing bytes after payload");

  t.taps.resize(count);
  for (std::uint64_t i = 0; i < count; ++i, off += 8) {
    const float re = load_le<float>(p + off);
    const float im = load_le<float>(p + off + 4);
    if (!std::isfinite(re) || !std::isfinite(im)) fail_at(Errc::NonFiniteTap, off, "non-finite tap");
    t.taps[i] = cf32(re, im);
  }
  if (!(t.time_step_us > 0.0) || !std::isfinite(t.time_step_us)) fail_at(Errc::Truncated, 24, "bad time step");
  return t;
}

CirTrace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_trace(std::as_bytes(std::span<const char>(raw)));
}

void write_trace_sidecar(const CirTrace& trace, const std::filesystem::path& trace_path, double doppler_hz) {
  auto meta_path = trace_path;
  meta_path.replace_extension(".meta.json");
  nlohmann::json j = {
      {"magic", "CIRT"},
      {"version", kCirtVersion},
      {"num_steps", trace.num_steps},
      {"num_bins", trace.grid.num_bins},
      {"bin_spacing_ns", trace.grid.bin_spacing_ns},
      {"sample_rate_hz", trace.grid.sample_rate_hz},
      {"time_step_us", trace.time_step_us},
      {"carrier_freq_hz", trace.carrier_freq_hz},
      {"doppler_hz", doppler_hz},
      {"label", trace.label},
  };
  std::ofstream out(meta_path, std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot open " + meta_path.string());
  out << j.dump(2) << '\n';
}

double step_power(std::span<const cf32> taps) {
  double p = 0.0;
  for (const cf32& h : taps) p += std::norm(cf64(h));
  return p;
}

double tap_power_db(const CirTrace& trace, std::uint32_t step) {
  if (step >= trace.num_steps)
    throw Error(Errc::StepOutOfRange, "step " + std::to_string(step) + " >= " + std::to_string(trace.num_steps));
  return 10.0 * std::log10(step_power(trace.step(step)));
}

}  // namespace tinytwin
