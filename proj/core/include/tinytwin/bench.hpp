// SPDX-License-Identifier: Apache-2.0
// Slot compute-time benchmark harness: sweeps (mode x UEs x taps x pinning),
// runs an in-process session per cell and summarizes the timing records.
#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tinytwin/fronthaul.hpp"

namespace tinytwin {

struct BenchMatrix {
  std::vector<SessionMode> modes{SessionMode::optimized};
  std::vector<std::size_t> ues{1};
  std::vector<std::size_t> taps{1};
  std::vector<bool> pinning{false};
  std::size_t sparse_n = 0;
  std::chrono::nanoseconds duration = std::chrono::seconds(60);
  std::chrono::nanoseconds slot_duration = std::chrono::milliseconds(1);
  std::uint32_t samples_per_slot = 1920;
  std::chrono::nanoseconds ue_timeout = std::chrono::milliseconds(10);
  std::size_t echo_count = 0;
  std::uint64_t seed = 1;
};

struct HostDescriptor {
  unsigned logical_cores = 0;
  double nominal_mhz = 0.0;  // 0 when unknown
  std::string cpu_model;
  std::string os;

  static HostDescriptor detect();
  friend bool operator==(const HostDescriptor&, const HostDescriptor&) = default;
};

/// Summary of a duration sample, in milliseconds.
struct DurationStats {
  std::size_t count = 0;
  double p50_ms = 0, p90_ms = 0, p99_ms = 0, max_ms = 0, mean_ms = 0;
  friend bool operator==(const DurationStats&, const DurationStats&) = default;
};

struct BenchReport {
  SessionMode mode = SessionMode::optimized;
  std::size_t num_ues = 0;
  std::size_t num_taps = 0;
  std::size_t sparse_n = 0;
  bool pinning = false;
  std::uint32_t samples_per_slot = 0;
  double slot_duration_ms = 1.0;
  double duration_s = 0.0;
  DurationStats compute;
  double overrun_fraction = 0.0;
  std::uint64_t ue_timeouts = 0;
  std::optional<DurationStats> echo_rtt;
  HostDescriptor host;

  double jitter_ratio() const { return compute.p50_ms > 0 ? compute.p99_ms / compute.p50_ms : 0.0; }
  friend bool operator==(const BenchReport&, const BenchReport&) = default;
};

/// Nearest-rank percentile: the ceil(q*N)-th smallest record (rank >= 1).
/// Throws EmptySample on no records and InvalidArgument for q outside [0,1].
std::chrono::nanoseconds percentile(std::span<const std::chrono::nanoseconds> records, double q);
std::chrono::nanoseconds percentile(std::span<const SlotTimingRecord> records, double q);

DurationStats summarize(std::span<const std::chrono::nanoseconds> records);

/// Multi-tap Rayleigh trace with an exponential PDP on integer bins.
CirTrace synthetic_bench_trace(std::size_t num_taps, std::uint64_t seed, std::uint32_t steps = 1000,
                               double doppler_hz = 16.2);

/// Runs one matrix cell.
BenchReport bench_cell(SessionMode mode, std::size_t num_ues, std::size_t num_taps, bool pinning,
                       const BenchMatrix& m);
/// Runs every cell in order; `on_cell` sees each report as it completes.
std::vector<BenchReport> run_bench(const BenchMatrix& m, const std::function<void(const BenchReport&)>& on_cell = {});

enum class ReportFormat { json, csv, markdown };
ReportFormat parse_report_format(const std::string& name);
/// Guesses from the extension (.json, .csv, .md); json otherwise.
ReportFormat report_format_for(const std::filesystem::path& path);

void to_json(nlohmann::json& j, const BenchReport& r);
void from_json(const nlohmann::json& j, BenchReport& r);
std::string render_report(std::span<const BenchReport> reports, ReportFormat format);
std::vector<BenchReport> parse_json_report(const std::string& text);
/// Throws IoFailure.
void emit_report(std::span<const BenchReport> reports, ReportFormat format, const std::filesystem::path& path);

std::string to_string(SessionMode mode);
SessionMode parse_mode(const std::string& name);

}  // namespace tinytwin
