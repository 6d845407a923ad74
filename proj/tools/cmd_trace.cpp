// SPDX-License-Identifier: Apache-2.0
// gen-trace and inspect.
#include <spdlog/spdlog.h>

#include <cmath>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "tinytwin/scenario.hpp"
#include "tinytwin/trace_gen.hpp"

namespace tinytwin::cli {

namespace {

struct GenArgs {
  std::string profile = "uma";
  std::optional<double> speed_kmh;
  std::optional<double> doppler_hz;
  std::string duration = "10s";
  std::uint64_t seed = 1;
  double sample_rate = 1.92e6;
  std::uint32_t num_bins = 0;
  double carrier_hz = kDefaultCarrierHz;
  std::string time_step = "1ms";
  std::string period = "10s";
  std::string snr = "20:0";
  std::size_t taps = 10;
  std::string from_csv;
  std::string label;
  std::string out;
};

std::pair<double, double> parse_snr_range(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw Error(Errc::InvalidArgument, "--snr expects HIGH:LOW, got '" + text + "'");
  try {
    return {std::stod(text.substr(0, colon)), std::stod(text.substr(colon + 1))};
  } catch (const std::exception&) {
    throw Error(Errc::InvalidArgument, "--snr expects HIGH:LOW, got '" + text + "'");
  }
}

double seconds(const std::string& text) { return std::chrono::duration<double>(parse_duration(text)).count(); }

double mean_power(const CirTrace& t) {
  double acc = 0;
  for (std::uint32_t s = 0; s < t.num_steps; ++s) acc += step_power(t.step(s));
  return t.num_steps ? acc / t.num_steps : 0.0;
}

std::string db(double p) {
  if (p <= 0) return "-inf";
  return fmt::format("{:.2f}", 10.0 * std::log10(p));
}

int run_gen_trace(const GenArgs& a) {
  CirTrace trace;
  double fd = 0.0;
  if (!a.from_csv.empty()) {
    ImportOptions o;
    o.sample_rate_hz = a.sample_rate;
    o.num_bins = a.num_bins;
    o.time_step_s = seconds(a.time_step);
    o.carrier_hz = a.carrier_hz;
    o.label = a.label.empty() ? "imported" : a.label;
    trace = import_external_cir(a.from_csv, ImportFormat::csv_paths, o);
  } else {
    GeneratorSpec gen;
    gen.profile = a.profile;
    gen.speed_kmh = a.speed_kmh;
    gen.doppler_hz = a.doppler_hz;
    gen.duration_s = seconds(a.duration);
    gen.seed = a.seed;
    gen.sample_rate_hz = a.sample_rate;
    gen.num_bins = a.num_bins;
    gen.carrier_hz = a.carrier_hz;
    gen.time_step_s = seconds(a.time_step);
    gen.period_s = seconds(a.period);
    std::tie(gen.snr_high_db, gen.snr_low_db) = parse_snr_range(a.snr);
    gen.num_taps = a.taps;
    trace = generate_trace(gen);
    fd = gen.effective_doppler();
    if (!a.label.empty()) trace.label = a.label;
  }
  trace.validate();
  const std::filesystem::path out = a.out;
  if (out.has_parent_path() && !std::filesystem::is_directory(out.parent_path()))
    throw Error(Errc::InvalidArgument, "output directory " + out.parent_path().string() + " does not exist");

  write_trace(trace, out);
  write_trace_sidecar(trace, out, fd);
  const double p = mean_power(trace);
  std::cout << "wrote " << out.string() << "\n"
            << "  label        " << trace.label << "\n"
            << "  steps (T)    " << trace.num_steps << "\n"
            << "  bins (L)     " << trace.grid.num_bins << "\n"
            << "  bin spacing  " << fmt::format("{:.3f}", trace.grid.bin_spacing_ns) << " ns\n"
            << "  time step    " << trace.time_step_us << " us\n"
            << "  mean power   " << db(p) << " dB (" << fmt::format("{:.4f}", p) << ")\n"
            << "  doppler f_d  " << fmt::format("{:.2f}", fd) << " Hz\n";
  return kExitOk;
}

int run_inspect(const std::string& path, const std::string& power_csv, bool as_json) {
  const auto t = load_trace(path);
  const std::uint32_t L = t.num_bins();
  std::vector<double> bin_power(L, 0.0);
  std::vector<double> step_pw(t.num_steps);
  for (std::uint32_t s = 0; s < t.num_steps; ++s) {
    const auto taps = t.step(s);
    for (std::uint32_t l = 0; l < L; ++l) bin_power[l] += std::norm(cf64(taps[l]));
    step_pw[s] = step_power(taps);
  }
  double total = 0;
  for (auto& b : bin_power) {
    b /= t.num_steps;
    total += b;
  }
  std::size_t active = 0;
  for (double b : bin_power)
    if (b > total * 1e-12) ++active;
  const double mean = total;

  if (!power_csv.empty()) {
    std::ofstream f(power_csv, std::ios::trunc);
    if (!f) throw Error(Errc::IoFailure, "cannot open " + power_csv);
    f << "step,time_s,power,power_db\n";
    for (std::uint32_t s = 0; s < t.num_steps; ++s)
      f << s << ',' << s * t.time_step_us * 1e-6 << ',' << step_pw[s] << ','
        << (step_pw[s] > 0 ? 10.0 * std::log10(step_pw[s]) : -INFINITY) << '\n';
  }

  if (as_json) {
    nlohmann::json j = {{"path", path},
                        {"num_steps", t.num_steps},
                        {"num_bins", L},
                        {"bin_spacing_ns", t.grid.bin_spacing_ns},
                        {"time_step_us", t.time_step_us},
                        {"carrier_freq_hz", t.carrier_freq_hz},
                        {"label", t.label},
                        {"mean_power", mean},
                        {"mean_power_db", mean > 0 ? 10.0 * std::log10(mean) : -1e300},
                        {"active_bins", active},
                        {"bin_power", bin_power}};
    std::cout << j.dump(2) << "\n";
    return kExitOk;
  }
  std::cout << path << "\n"
            << "  magic/version CIRT v" << kCirtVersion << "\n"
            << "  label         " << t.label << "\n"
            << "  steps (T)     " << t.num_steps << "\n"
            << "  bins (L)      " << L << "\n"
            << "  bin spacing   " << fmt::format("{:.3f}", t.grid.bin_spacing_ns) << " ns\n"
            << "  time step     " << t.time_step_us << " us\n"
            << "  carrier       " << fmt::format("{:.4g}", t.carrier_freq_hz) << " Hz\n"
            << "  mean power    " << db(mean) << " dB\n"
            << "  active bins   " << active << "\n"
            << "  per-bin mean power (dB):\n";
  for (std::uint32_t l = 0; l < L; ++l)
    std::cout << fmt::format("    bin {:4d}  {:>8}  ({:.1f} ns)\n", l, db(bin_power[l]), l * t.grid.bin_spacing_ns);
  return kExitOk;
}

}  // namespace

void add_gen_trace(CLI::App& app, const GlobalOptions& g, int& rc) {
  auto a = std::make_shared<GenArgs>();
  auto* sub = app.add_subcommand("gen-trace", "synthesize or import a CIRT channel trace");
  sub->add_option("--profile", a->profile, "identity|synthetic-periodic|bench-exp|file:<pdp.json>|<name> (profiles/<name>.json: uma, umi, rma)")
      ->capture_default_str();
  auto* speed = sub->add_option("--speed-kmh", a->speed_kmh, "UE speed; sets f_d = v*f_c/c");
  sub->add_option("--doppler-hz", a->doppler_hz, "maximum Doppler shift")->excludes(speed);
  sub->add_option("--duration", a->duration, "trace length, e.g. 60s")->capture_default_str();
  sub->add_option("--seed", a->seed)->capture_default_str();
  sub->add_option("--sample-rate", a->sample_rate, "Hz; bin spacing = 1/sample-rate")->capture_default_str();
  sub->add_option("--num-bins", a->num_bins, "0 = fit the profile")->capture_default_str();
  sub->add_option("--carrier-hz", a->carrier_hz)->capture_default_str();
  sub->add_option("--time-step", a->time_step, "trace step, e.g. 1ms")->capture_default_str();
  sub->add_option("--period", a->period, "synthetic-periodic sweep period")->capture_default_str();
  sub->add_option("--snr", a->snr, "synthetic-periodic HIGH:LOW in dB")->capture_default_str();
  sub->add_option("--taps", a->taps, "bench-exp tap count")->capture_default_str();
  sub->add_option("--from-csv", a->from_csv, "import time_s,delay_ns,re,im rows instead of generating")
      ->check(CLI::ExistingFile);
  sub->add_option("--label", a->label);
  sub->add_option("-o,--out", a->out, "output .cirt path")->required();
  sub->callback([&g, &rc, a] {
    apply_globals(g);
    rc = run_gen_trace(*a);
  });
}

void add_inspect(CLI::App& app, const GlobalOptions& g, int& rc) {
  auto path = std::make_shared<std::string>();
  auto csv = std::make_shared<std::string>();
  auto json = std::make_shared<bool>(false);
  auto* sub = app.add_subcommand("inspect", "print a trace header and power summary");
  sub->add_option("trace", *path, "CIRT file")->required();
  sub->add_option("--power-csv", *csv, "write the per-step total power series");
  sub->add_flag("--json", *json, "machine-readable summary");
  sub->callback([&g, &rc, path, csv, json] {
    apply_globals(g);
    rc = run_inspect(*path, *csv, *json);
  });
}

}  // namespace tinytwin::cli
