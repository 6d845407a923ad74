// SPDX-License-Identifier: Apache-2.0
#include "tinytwin/bench.hpp"

#include <spdlog/spdlog.h>
#include <sys/utsname.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

#include "tinytwin/pinning.hpp"
#include "tinytwin/rng.hpp"
#include "tinytwin/session.hpp"
#include "tinytwin/trace_gen.hpp"

namespace tinytwin {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

double ms(std::chrono::nanoseconds d) { return std::chrono::duration<double, std::milli>(d).count(); }

}  // namespace

HostDescriptor HostDescriptor::detect() {
  HostDescriptor h;
  h.logical_cores = host_core_count();
  std::ifstream cpuinfo("/proc/cpuinfo");
  std::string line;
  double cur_mhz = 0.0;
  while (std::getline(cpuinfo, line)) {
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    const auto key = trim(line.substr(0, colon));
    const auto val = trim(line.substr(colon + 1));
    if (key == "model name" && h.cpu_model.empty()) h.cpu_model = val;
    if (key == "cpu MHz" && cur_mhz == 0.0) cur_mhz = std::atof(val.c_str());
  }
  std::ifstream maxf("/sys/devices/system/cpu/cpu0/cpufreq/cpuinfo_max_freq");
  long khz = 0;
  if (maxf >> khz && khz > 0) {
    h.nominal_mhz = khz / 1000.0;
  } else if (const auto at = h.cpu_model.find('@'); at != std::string::npos) {
    h.nominal_mhz = std::atof(h.cpu_model.c_str() + at + 1) * 1000.0;
  } else {
    h.nominal_mhz = cur_mhz;
  }
  utsname u{};
  if (::uname(&u) == 0) h.os = std::string(u.sysname) + " " + u.release + " " + u.machine;
  return h;
}

std::chrono::nanoseconds percentile(std::span<const std::chrono::nanoseconds> records, double q) {
  if (records.empty()) throw Error(Errc::EmptySample, "percentile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw Error(Errc::InvalidArgument, "percentile q must be in [0, 1]");
  std::vector<std::chrono::nanoseconds> v(records.begin(), records.end());
  const auto n = v.size();
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n) - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(rank - 1), v.end());
  return v[rank - 1];
}

std::chrono::nanoseconds percentile(std::span<const SlotTimingRecord> records, double q) {
  std::vector<std::chrono::nanoseconds> v;
  v.reserve(records.size());
  for (const auto& r : records) v.push_back(r.compute);
  return percentile(v, q);
}

DurationStats summarize(std::span<const std::chrono::nanoseconds> records) {
  DurationStats s;
  s.count = records.size();
  if (records.empty()) return s;
  s.p50_ms = ms(percentile(records, 0.50));
  s.p90_ms = ms(percentile(records, 0.90));
  s.p99_ms = ms(percentile(records, 0.99));
  s.max_ms = ms(percentile(records, 1.0));
  double sum = 0;
  for (auto r : records) sum += ms(r);
  s.mean_ms = sum / static_cast<double>(records.size());
  return s;
}

CirTrace synthetic_bench_trace(std::size_t num_taps, std::uint64_t seed, std::uint32_t steps, double doppler_hz) {
  if (num_taps == 0) throw Error(Errc::InvalidArgument, "bench trace needs at least one tap");
  const double fs = 1.92e6;
  const auto grid = DelayGrid::from_sample_rate(fs, static_cast<std::uint32_t>(num_taps));
  PdpProfile pdp;
  pdp.name = "bench-exp" + std::to_string(num_taps);
  pdp.doppler_hz = doppler_hz;
  // exponential decay reaching -20 dB at the last tap
  for (std::size_t l = 0; l < num_taps; ++l) {
    pdp.path_delays_ns.push_back(static_cast<double>(l) * grid.bin_spacing_ns);
    pdp.path_powers_db.push_back(num_taps > 1 ? -20.0 * static_cast<double>(l) / static_cast<double>(num_taps - 1) : 0.0);
  }
  pdp.normalize();
  TraceOptions opts;
  const double duration = static_cast<double>(steps) * opts.time_step_s;
  auto t = build_3gpp_trace(pdp, grid, duration, seed, opts);
  t.label = pdp.name;
  return t;
}

BenchReport bench_cell(SessionMode mode, std::size_t num_ues, std::size_t num_taps, bool pinning,
                       const BenchMatrix& m) {
  if (num_ues == 0) throw Error(Errc::InvalidArgument, "bench cell needs at least one UE");
  if (m.slot_duration.count() <= 0) throw Error(Errc::InvalidArgument, "slot duration must be positive");
  const auto cores = host_core_count();
  if (pinning && cores < 2 * num_ues)
    spdlog::warn("{}: pinned run wants {} logical cores, host has {}", to_string(Errc::InsufficientCores),
                 2 * num_ues, cores);

  LocalSessionConfig cfg;
  cfg.mode = mode;
  cfg.samples_per_slot = m.samples_per_slot;
  cfg.slot_duration = m.slot_duration;
  cfg.sparse_n = m.sparse_n;
  cfg.seed = m.seed;
  cfg.num_slots = static_cast<std::uint64_t>(std::max<std::int64_t>(1, m.duration / m.slot_duration));
  cfg.pinning = pinning;
  if (pinning && cores > 1) cfg.gnb_cores = {0};
  cfg.ue_timeout = m.ue_timeout;
  cfg.echo_count = m.echo_count;
  for (std::size_t u = 0; u < num_ues; ++u) {
    auto trace = std::make_shared<CirTrace>(
        synthetic_bench_trace(num_taps, derive_seed({m.seed, static_cast<std::uint64_t>(num_taps), u})));
    cfg.ues.push_back(LocalUeSpec{static_cast<std::uint32_t>(u), std::move(trace), {}});
  }

  spdlog::info("bench: {} ues={} taps={} pinning={} slots={}", to_string(mode), num_ues, num_taps, pinning,
               cfg.num_slots);
  const auto res = run_local_session(cfg);

  BenchReport r;
  r.mode = mode;
  r.num_ues = num_ues;
  r.num_taps = num_taps;
  r.sparse_n = m.sparse_n;
  r.pinning = pinning;
  r.samples_per_slot = m.samples_per_slot;
  r.slot_duration_ms = ms(m.slot_duration);
  r.duration_s = std::chrono::duration<double>(m.slot_duration * static_cast<std::int64_t>(cfg.num_slots)).count();
  std::vector<std::chrono::nanoseconds> compute;
  compute.reserve(res.timing.size());
  std::size_t overruns = 0;
  for (const auto& t : res.timing) {
    compute.push_back(t.compute);
    overruns += t.overrun ? 1 : 0;
  }
  r.compute = summarize(compute);
  r.overrun_fraction = compute.empty() ? 0.0 : static_cast<double>(overruns) / static_cast<double>(compute.size());
  r.ue_timeouts = res.gnb.ue_timeouts;
  if (!res.echo_rtts.empty()) r.echo_rtt = summarize(res.echo_rtts);
  r.host = HostDescriptor::detect();
  return r;
}

std::vector<BenchReport> run_bench(const BenchMatrix& m, const std::function<void(const BenchReport&)>& on_cell) {
  std::vector<BenchReport> out;
  for (auto mode : m.modes)
    for (auto ues : m.ues)
      for (auto taps : m.taps)
        for (bool pin : m.pinning) {
          out.push_back(bench_cell(mode, ues, taps, pin, m));
          if (on_cell) on_cell(out.back());
        }
  return out;
}

std::string to_string(SessionMode mode) { return mode == SessionMode::vanilla ? "vanilla" : "optimized"; }

SessionMode parse_mode(const std::string& name) {
  if (name == "vanilla") return SessionMode::vanilla;
  if (name == "optimized") return SessionMode::optimized;
  throw Error(Errc::InvalidArgument, "mode must be vanilla or optimized, got '" + name + "'");
}

ReportFormat parse_report_format(const std::string& name) {
  if (name == "json") return ReportFormat::json;
  if (name == "csv") return ReportFormat::csv;
  if (name == "markdown" || name == "md") return ReportFormat::markdown;
  throw Error(Errc::InvalidArgument, "unknown report format '" + name + "'");
}

ReportFormat report_format_for(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return ReportFormat::csv;
  if (ext == ".md" || ext == ".markdown") return ReportFormat::markdown;
  return ReportFormat::json;
}

namespace {

nlohmann::json stats_json(const DurationStats& s) {
  return {{"count", s.count}, {"p50_ms", s.p50_ms}, {"p90_ms", s.p90_ms},
          {"p99_ms", s.p99_ms}, {"max_ms", s.max_ms}, {"mean_ms", s.mean_ms}};
}

DurationStats stats_from(const nlohmann::json& j) {
  DurationStats s;
  s.count = j.at("count").get<std::size_t>();
  s.p50_ms = j.at("p50_ms").get<double>();
  s.p90_ms = j.at("p90_ms").get<double>();
  s.p99_ms = j.at("p99_ms").get<double>();
  s.max_ms = j.at("max_ms").get<double>();
  s.mean_ms = j.at("mean_ms").get<double>();
  return s;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

void to_json(nlohmann::json& j, const BenchReport& r) {
  j = nlohmann::json{
      {"config",
       {{"mode", to_string(r.mode)},
        {"num_ues", r.num_ues},
        {"num_taps", r.num_taps},
        {"sparse_n", r.sparse_n},
        {"pinning", r.pinning},
        {"samples_per_slot", r.samples_per_slot},
        {"slot_duration_ms", r.slot_duration_ms},
        {"duration_s", r.duration_s}}},
      {"compute", stats_json(r.compute)},
      {"overrun_fraction", r.overrun_fraction},
      {"ue_timeouts", r.ue_timeouts},
      {"echo_rtt", r.echo_rtt ? stats_json(*r.echo_rtt) : nlohmann::json(nullptr)},
      {"host",
       {{"logical_cores", r.host.logical_cores},
        {"nominal_mhz", r.host.nominal_mhz},
        {"cpu_model", r.host.cpu_model},
        {"os", r.host.os}}},
  };
}

void from_json(const nlohmann::json& j, BenchReport& r) {
  const auto& c = j.at("config");
  r.mode = parse_mode(c.at("mode").get<std::string>());
  r.num_ues = c.at("num_ues").get<std::size_t>();
  r.num_taps = c.at("num_taps").get<std::size_t>();
  r.sparse_n = c.at("sparse_n").get<std::size_t>();
  r.pinning = c.at("pinning").get<bool>();
  r.samples_per_slot = c.at("samples_per_slot").get<std::uint32_t>();
  r.slot_duration_ms = c.at("slot_duration_ms").get<double>();
  r.duration_s = c.at("duration_s").get<double>();
  r.compute = stats_from(j.at("compute"));
  r.overrun_fraction = j.at("overrun_fraction").get<double>();
  r.ue_timeouts = j.at("ue_timeouts").get<std::uint64_t>();
  if (j.contains("echo_rtt") && !j.at("echo_rtt").is_null())
    r.echo_rtt = stats_from(j.at("echo_rtt"));
  else
    r.echo_rtt.reset();
  const auto& h = j.at("host");
  r.host.logical_cores = h.at("logical_cores").get<unsigned>();
  r.host.nominal_mhz = h.at("nominal_mhz").get<double>();
  r.host.cpu_model = h.at("cpu_model").get<std::string>();
  r.host.os = h.at("os").get<std::string>();
}

std::string render_report(std::span<const BenchReport> reports, ReportFormat format) {
  switch (format) {
    case ReportFormat::json: {
      nlohmann::json doc;
      doc["format"] = "tinytwin-bench";
      doc["version"] = 1;
      doc["reports"] = nlohmann::json::array();
      for (const auto& r : reports) doc["reports"].push_back(r);
      return doc.dump(2) + "\n";
    }
    case ReportFormat::csv: {
      std::ostringstream os;
      os << "mode,num_ues,num_taps,sparse_n,pinning,samples_per_slot,slot_duration_ms,duration_s,slots,"
            "p50_ms,p90_ms,p99_ms,max_ms,mean_ms,overrun_fraction,ue_timeouts,echo_p50_ms,echo_p90_ms,"
            "logical_cores,nominal_mhz\n";
      for (const auto& r : reports) {
        os << to_string(r.mode) << ',' << r.num_ues << ',' << r.num_taps << ',' << r.sparse_n << ','
           << (r.pinning ? 1 : 0) << ',' << r.samples_per_slot << ',' << fmt_double(r.slot_duration_ms) << ','
           << fmt_double(r.duration_s) << ',' << r.compute.count << ',' << fmt_double(r.compute.p50_ms) << ','
           << fmt_double(r.compute.p90_ms) << ',' << fmt_double(r.compute.p99_ms) << ','
           << fmt_double(r.compute.max_ms) << ',' << fmt_double(r.compute.mean_ms) << ','
           << fmt_double(r.overrun_fraction) << ',' << r.ue_timeouts << ','
           << (r.echo_rtt ? fmt_double(r.echo_rtt->p50_ms) : "") << ','
           << (r.echo_rtt ? fmt_double(r.echo_rtt->p90_ms) : "") << ',' << r.host.logical_cores << ','
           << fmt_double(r.host.nominal_mhz) << '\n';
      }
      return os.str();
    }
    case ReportFormat::markdown: {
      std::ostringstream os;
      if (!reports.empty())
        os << "Host: " << reports.front().host.cpu_model << ", " << reports.front().host.logical_cores
           << " logical cores, " << fmt_double(reports.front().host.nominal_mhz) << " MHz\n\n";
      os << "| mode | UEs | taps | sparse n | pinned | slots | p50 (ms) | p90 (ms) | p99 (ms) | max (ms) | overrun | "
            "UE timeouts |\n";
      os << "|---|---|---|---|---|---|---|---|---|---|---|---|\n";
      for (const auto& r : reports) {
        os << "| " << to_string(r.mode) << " | " << r.num_ues << " | " << r.num_taps << " | " << r.sparse_n << " | "
           << (r.pinning ? "yes" : "no") << " | " << r.compute.count << " | " << fmt_double(r.compute.p50_ms)
           << " | " << fmt_double(r.compute.p90_ms) << " | " << fmt_double(r.compute.p99_ms) << " | "
           << fmt_double(r.compute.max_ms) << " | " << fmt_double(r.overrun_fraction) << " | " << r.ue_timeouts
           << " |\n";
      }
      return os.str();
    }
  }
  throw Error(Errc::InvalidArgument, "unknown report format");
}

std::vector<BenchReport> parse_json_report(const std::string& text) {
  std::vector<BenchReport> out;
  try {
    const auto doc = nlohmann::json::parse(text);
    if (doc.value("format", "") != "tinytwin-bench") throw Error(Errc::InvalidArgument, "not a tinytwin bench report");
    for (const auto& r : doc.at("reports")) out.push_back(r.get<BenchReport>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("bench report: ") + e.what());
  }
  return out;
}

void emit_report(std::span<const BenchReport> reports, ReportFormat format, const std::filesystem::path& path) {
  const auto text = render_report(reports, format);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::IoFailure, "cannot open " + path.string() + " for writing");
  f << text;
  if (!f.flush()) throw Error(Errc::IoFailure, "write to " + path.string() + " failed");
}

}  // namespace tinytwin
