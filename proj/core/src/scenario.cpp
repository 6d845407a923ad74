// SPDX-License-Identifier: Apache-2.0
#include "tinytwin/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>

#include "tinytwin/bench.hpp"
#include "tinytwin/trace_gen.hpp"

namespace tinytwin {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(Errc::InvalidArgument, what);
}

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, std::optional<T>& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

}  // namespace

double GeneratorSpec::effective_doppler() const {
  if (doppler_hz) return *doppler_hz;
  if (speed_kmh) return doppler_from_speed(*speed_kmh, carrier_hz);
  return 0.0;
}

void GeneratorSpec::validate() const {
  require(!(speed_kmh && doppler_hz), "give either speed_kmh or doppler_hz, not both");
  require(!speed_kmh || (*speed_kmh >= 0 && std::isfinite(*speed_kmh)), "speed_kmh must be >= 0");
  require(!doppler_hz || (*doppler_hz >= 0 && std::isfinite(*doppler_hz)), "doppler_hz must be >= 0");
  require(duration_s > 0 && std::isfinite(duration_s), "duration must be positive");
  require(time_step_s > 0 && std::isfinite(time_step_s), "time step must be positive");
  require(sample_rate_hz > 0 && std::isfinite(sample_rate_hz), "sample rate must be positive");
  require(carrier_hz > 0 && std::isfinite(carrier_hz), "carrier frequency must be positive");
  require(num_sinusoids >= 8, "num_sinusoids must be at least 8");
  if (profile == "synthetic-periodic") {
    require(period_s > 0, "period must be positive");
    require(snr_high_db >= snr_low_db, "snr range must run high:low");
  }
  if (profile == "bench-exp") require(num_taps >= 1, "num_taps must be >= 1");
  const bool special = profile == "identity" || profile == "synthetic-periodic" || profile == "bench-exp" ||
                       profile.rfind("file:", 0) == 0;
  if (!special) {
    const auto names = builtin_profile_names();
    require(std::find(names.begin(), names.end(), profile) != names.end(), "unknown profile '" + profile + "'");
  }
  if (profile.rfind("file:", 0) == 0)
    require(std::filesystem::exists(profile.substr(5)), "profile file " + profile.substr(5) + " does not exist");
}

CirTrace generate_trace(const GeneratorSpec& gen) {
  gen.validate();
  TraceOptions opts;
  opts.time_step_s = gen.time_step_s;
  opts.num_sinusoids = gen.num_sinusoids;
  opts.carrier_hz = gen.carrier_hz;

  if (gen.profile == "identity") {
    CirTrace t;
    t.grid = DelayGrid::from_sample_rate(gen.sample_rate_hz, std::max<std::uint32_t>(1, gen.num_bins));
    t.time_step_us = gen.time_step_s * 1e6;
    t.num_steps = static_cast<std::uint32_t>(std::max(1.0, std::round(gen.duration_s / gen.time_step_s)));
    t.taps.assign(static_cast<std::size_t>(t.num_steps) * t.grid.num_bins, cf32{});
    for (std::uint32_t s = 0; s < t.num_steps; ++s) t.taps[static_cast<std::size_t>(s) * t.grid.num_bins] = 1.0f;
    t.carrier_freq_hz = gen.carrier_hz;
    t.label = "identity";
    return t;
  }
  if (gen.profile == "synthetic-periodic") {
    const auto grid = DelayGrid::from_sample_rate(gen.sample_rate_hz, std::max<std::uint32_t>(1, gen.num_bins));
    return gen_periodic_snr_trace(gen.period_s, gen.snr_high_db, gen.snr_low_db, gen.duration_s, grid, opts);
  }
  if (gen.profile == "bench-exp") {
    const auto steps = static_cast<std::uint32_t>(std::max(1.0, std::round(gen.duration_s / gen.time_step_s)));
    const double fd = gen.doppler_hz || gen.speed_kmh ? gen.effective_doppler() : 16.2;
    return synthetic_bench_trace(gen.num_taps, gen.seed, steps, fd);
  }
  PdpProfile pdp = gen.profile.rfind("file:", 0) == 0 ? PdpProfile::load_json(gen.profile.substr(5))
                                                        : builtin_profile(gen.profile);
  pdp.doppler_hz = gen.effective_doppler();
  auto grid = grid_for_profile(pdp, gen.sample_rate_hz);
  if (gen.num_bins != 0) grid = DelayGrid::from_sample_rate(gen.sample_rate_hz, gen.num_bins);
  auto t = build_3gpp_trace(pdp, grid, gen.duration_s, gen.seed, opts);
  t.label = pdp.name;
  return t;
}

void to_json(nlohmann::json& j, const GeneratorSpec& g) {
  j = nlohmann::json{{"profile", g.profile},
                     {"duration_s", g.duration_s},
                     {"seed", g.seed},
                     {"sample_rate_hz", g.sample_rate_hz},
                     {"num_bins", g.num_bins},
                     {"carrier_hz", g.carrier_hz},
                     {"time_step_s", g.time_step_s},
                     {"num_sinusoids", g.num_sinusoids},
                     {"doppler_hz_effective", g.effective_doppler()}};
  if (g.speed_kmh) j["speed_kmh"] = *g.speed_kmh;
  if (g.doppler_hz) j["doppler_hz"] = *g.doppler_hz;
  if (g.profile == "synthetic-periodic") {
    j["period_s"] = g.period_s;
    j["snr_high_db"] = g.snr_high_db;
    j["snr_low_db"] = g.snr_low_db;
  }
  if (g.profile == "bench-exp") j["num_taps"] = g.num_taps;
}

void from_json(const nlohmann::json& j, GeneratorSpec& g) {
  g = GeneratorSpec{};
  read_opt(j, "profile", g.profile);
  read_opt(j, "speed_kmh", g.speed_kmh);
  read_opt(j, "doppler_hz", g.doppler_hz);
  read_opt(j, "duration_s", g.duration_s);
  read_opt(j, "seed", g.seed);
  read_opt(j, "sample_rate_hz", g.sample_rate_hz);
  read_opt(j, "num_bins", g.num_bins);
  read_opt(j, "carrier_hz", g.carrier_hz);
  read_opt(j, "time_step_s", g.time_step_s);
  read_opt(j, "num_sinusoids", g.num_sinusoids);
  read_opt(j, "period_s", g.period_s);
  read_opt(j, "snr_high_db", g.snr_high_db);
  read_opt(j, "snr_low_db", g.snr_low_db);
  read_opt(j, "num_taps", g.num_taps);
}

ScenarioConfig ScenarioConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::InvalidArgument, "cannot open scenario " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, path.string() + ": " + e.what());
  }
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  return parse(doc, base);
}

ScenarioConfig ScenarioConfig::parse(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
  ScenarioConfig c;
  try {
    if (doc.contains("gnb")) {
      const auto& g = doc.at("gnb");
      read_opt(g, "listen", c.listen);
      read_opt(g, "cores", c.gnb_cores);
    }
    if (doc.contains("mode")) c.mode = parse_mode(doc.at("mode").get<std::string>());
    read_opt(doc, "samples_per_slot", c.samples_per_slot);
    read_opt(doc, "slot_duration_ms", c.slot_duration_ms);
    read_opt(doc, "sparse_n", c.sparse_n);
    read_opt(doc, "noise_power", c.noise_power);
    read_opt(doc, "signal_power", c.signal_power);
    read_opt(doc, "duration_s", c.duration_s);
    read_opt(doc, "seed", c.seed);
    read_opt(doc, "metrics_addr", c.metrics_addr);
    read_opt(doc, "pinning", c.pinning);
    read_opt(doc, "ue_timeout_ms", c.ue_timeout_ms);
    read_opt(doc, "offered_bits_per_slot", c.offered_bits_per_slot);
    read_opt(doc, "stochastic_tb", c.stochastic_tb);
    if (doc.contains("mcs_table")) {
      std::filesystem::path p = doc.at("mcs_table").get<std::string>();
      c.mcs_table = p.is_absolute() ? p : base_dir / p;
    }
    for (const auto& u : doc.at("ues")) {
      ScenarioUe ue;
      ue.id = u.at("id").get<std::uint32_t>();
      if (u.contains("trace")) {
        std::filesystem::path p = u.at("trace").get<std::string>();
        ue.trace = p.is_absolute() ? p : base_dir / p;
      }
      if (u.contains("generator")) {
        ue.generator = u.at("generator").get<GeneratorSpec>();
        if (ue.generator->profile.rfind("file:", 0) == 0) {
          std::filesystem::path p = ue.generator->profile.substr(5);
          if (!p.is_absolute()) ue.generator->profile = "file:" + (base_dir / p).string();
        }
      }
      read_opt(u, "cores", ue.cores);
      c.ues.push_back(std::move(ue));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("scenario: ") + e.what());
  }
  c.validate();
  return c;
}

void ScenarioConfig::validate() const {
  require(!ues.empty(), "scenario lists no UEs");
  require(samples_per_slot > 0, "samples_per_slot must be positive");
  require(slot_duration_ms > 0 && std::isfinite(slot_duration_ms), "slot_duration_ms must be positive");
  require(duration_s > 0 && std::isfinite(duration_s), "duration_s must be positive");
  require(noise_power >= 0 && std::isfinite(noise_power), "noise_power must be >= 0");
  require(signal_power > 0 && std::isfinite(signal_power), "signal_power must be positive");
  require(ue_timeout_ms > 0, "ue_timeout_ms must be positive");
  std::set<std::uint32_t> ids;
  for (const auto& u : ues) {
    require(ids.insert(u.id).second, "duplicate UE id " + std::to_string(u.id));
    require(u.trace.has_value() != u.generator.has_value(),
            "UE " + std::to_string(u.id) + " needs exactly one of trace or generator");
    if (u.trace)
      require(std::filesystem::is_regular_file(*u.trace),
              "UE " + std::to_string(u.id) + ": trace " + u.trace->string() + " does not exist");
    if (u.generator) u.generator->validate();
  }
  if (mcs_table) require(std::filesystem::is_regular_file(*mcs_table), "mcs table " + mcs_table->string() + " does not exist");
}

std::uint64_t ScenarioConfig::num_slots() const {
  return static_cast<std::uint64_t>(std::llround(duration_s * 1000.0 / slot_duration_ms));
}

std::chrono::nanoseconds ScenarioConfig::slot_duration() const {
  return std::chrono::nanoseconds(std::llround(slot_duration_ms * 1e6));
}

std::shared_ptr<const CirTrace> ScenarioConfig::materialize(const ScenarioUe& ue) const {
  if (ue.trace) return std::make_shared<const CirTrace>(load_trace(*ue.trace));
  return std::make_shared<const CirTrace>(generate_trace(*ue.generator));
}

McsTable ScenarioConfig::load_mcs_table() const {
  return mcs_table ? McsTable::load_json(*mcs_table) : McsTable::nr_default();
}

LocalSessionConfig ScenarioConfig::to_session() const {
  LocalSessionConfig s;
  s.mode = mode;
  s.samples_per_slot = samples_per_slot;
  s.slot_duration = slot_duration();
  s.sparse_n = sparse_n;
  s.noise_power = noise_power;
  s.signal_power = signal_power;
  s.seed = seed;
  s.num_slots = num_slots();
  s.gnb_cores = gnb_cores;
  s.pinning = pinning;
  s.ue_timeout = std::chrono::nanoseconds(std::llround(ue_timeout_ms * 1e6));
  s.offered_bits_per_slot = offered_bits_per_slot;
  s.mcs_table = load_mcs_table();
  s.tb.stochastic = stochastic_tb;
  s.tb.seed = seed;
  for (const auto& u : ues) s.ues.push_back(LocalUeSpec{u.id, materialize(u), u.cores});
  return s;
}

}  // namespace tinytwin
