// SPDX-License-Identifier: Apache-2.0
// Scenario files (JSON) and trace generator settings shared by the CLI.
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tinytwin/chan_model.hpp"
#include "tinytwin/session.hpp"

namespace tinytwin {

/// How to synthesize a trace. `profile` is one of:
///   identity            single unit tap
///   uma | umi | <name> profiles/<name>.json on the search path, Jakes fading
///   synthetic-periodic  single tap sweeping snr_high -> snr_low each period
///   bench-exp           exponential PDP on num_taps integer bins
///   file:<path>         PDP loaded from a profile JSON
struct GeneratorSpec {
  std::string profile = "identity";
  std::optional<double> speed_kmh;
  std::optional<double> doppler_hz;
  double duration_s = 10.0;
  std::uint64_t seed = 1;
  double sample_rate_hz = 1.92e6;
  std::uint32_t num_bins = 0;  // 0 = fit the profile
  double carrier_hz = 3.5e9;
  double time_step_s = 1e-3;
  std::uint32_t num_sinusoids = 32;
  double period_s = 10.0;
  double snr_high_db = 20.0;
  double snr_low_db = 0.0;
  std::size_t num_taps = 1;

  /// Doppler implied by speed or given directly; 0 if neither.
  double effective_doppler() const;
  void validate() const;
};

/// Throws InvalidArgument / NyquistViolation / GridTooShort.
CirTrace generate_trace(const GeneratorSpec& gen);

void to_json(nlohmann::json& j, const GeneratorSpec& g);
void from_json(const nlohmann::json& j, GeneratorSpec& g);

struct ScenarioUe {
  std::uint32_t id = 0;
  std::optional<std::filesystem::path> trace;  // resolved against the scenario's directory
  std::optional<GeneratorSpec> generator;
  std::vector<unsigned> cores;
};

struct ScenarioConfig {
  std::string listen = "127.0.0.1:0";
  SessionMode mode = SessionMode::optimized;
  std::uint32_t samples_per_slot = 1920;
  double slot_duration_ms = 1.0;
  std::size_t sparse_n = 0;
  double noise_power = 0.0;
  double signal_power = 1.0;
  double duration_s = 5.0;
  std::uint64_t seed = 1;
  std::optional<std::string> metrics_addr;
  bool pinning = false;
  std::vector<unsigned> gnb_cores;
  double ue_timeout_ms = 10.0;
  std::uint64_t offered_bits_per_slot = 0;
  std::optional<std::filesystem::path> mcs_table;
  bool stochastic_tb = false;
  std::vector<ScenarioUe> ues;

  /// Parses and validates; relative paths resolve against the file's directory.
  static ScenarioConfig load(const std::filesystem::path& path);
  static ScenarioConfig parse(const nlohmann::json& doc, const std::filesystem::path& base_dir);
  /// Unique ids, existing trace files, sane numbers. Throws InvalidArgument.
  void validate() const;

  std::uint64_t num_slots() const;
  std::chrono::nanoseconds slot_duration() const;
  std::shared_ptr<const CirTrace> materialize(const ScenarioUe& ue) const;
  McsTable load_mcs_table() const;
  /// Loads or generates every trace.
  LocalSessionConfig to_session() const;
};

}  // namespace tinytwin
