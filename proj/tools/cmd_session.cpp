// SPDX-License-Identifier: Apache-2.0
// gnb, ue and run.
#include <signal.h>
#include <spawn.h>
#include <spdlog/spdlog.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstring>
#include <fstream>
#include <iostream>
#include <mutex>
#include <nlohmann/json.hpp>
#include <thread>

#include "commands.hpp"
#include "tinytwin/bench.hpp"
#include "tinytwin/metrics.hpp"
#include "tinytwin/pinning.hpp"
#include "tinytwin/scenario.hpp"
#include "tinytwin/session.hpp"

extern char** environ;

namespace tinytwin::cli {

namespace {

std::mutex g_gnb_mu;
GnbSession* g_gnb = nullptr;

void set_active_gnb(GnbSession* gnb) {
  std::lock_guard lk(g_gnb_mu);
  g_gnb = gnb;
}

void install_gnb_stop_handler() {
  on_shutdown_signal([] {
    std::lock_guard lk(g_gnb_mu);
    if (g_gnb) g_gnb->stop();
  });
}

/// Registry plus HTTP endpoint when an address is configured.
struct MetricsStack {
  MetricsRegistry registry;
  TwinMetrics twin{registry};
  std::unique_ptr<MetricsServer> server;

  explicit MetricsStack(const std::string& addr) {
    if (addr.empty()) return;
    server = serve_metrics(registry, addr);
    spdlog::info("metrics on http://{}:{}/metrics", net_host(addr), server->port());
  }
  static std::string net_host(const std::string& addr) {
    const auto c = addr.rfind(':');
    return c == std::string::npos || c == 0 ? std::string("0.0.0.0") : addr.substr(0, c);
  }
};

std::string metrics_addr_for(const GlobalOptions& g, const ScenarioConfig& sc) {
  if (!g.metrics_addr.empty()) return g.metrics_addr;
  return sc.metrics_addr.value_or("");
}

nlohmann::json timing_summary(const std::vector<SlotTimingRecord>& timing) {
  std::vector<std::chrono::nanoseconds> v;
  std::size_t overruns = 0;
  for (const auto& t : timing) {
    v.push_back(t.compute);
    overruns += t.overrun;
  }
  const auto s = summarize(v);
  return {{"slots", timing.size()},
          {"p50_ms", s.p50_ms},
          {"p90_ms", s.p90_ms},
          {"p99_ms", s.p99_ms},
          {"max_ms", s.max_ms},
          {"mean_ms", s.mean_ms},
          {"overruns", overruns},
          {"overrun_fraction", timing.empty() ? 0.0 : static_cast<double>(overruns) / timing.size()}};
}

void print_summary(const nlohmann::json& j) {
  const auto& c = j.at("compute");
  std::cout << fmt::format("run complete: {} slots at {} ms ({} mode, {} UEs)\n", c.at("slots").get<std::size_t>(),
                           j.at("slot_duration_ms").get<double>(), j.at("mode").get<std::string>(),
                           j.at("num_ues").get<std::size_t>());
  std::cout << fmt::format("  compute p50 {:.3f} ms  p90 {:.3f} ms  p99 {:.3f} ms  max {:.3f} ms\n",
                           c.at("p50_ms").get<double>(), c.at("p90_ms").get<double>(), c.at("p99_ms").get<double>(),
                           c.at("max_ms").get<double>());
  std::cout << fmt::format("  overruns {} ({:.2f}%)  ue timeouts {}\n", c.at("overruns").get<std::size_t>(),
                           100.0 * c.at("overrun_fraction").get<double>(), j.at("ue_timeouts").get<std::uint64_t>());
  if (j.contains("ues"))
    for (const auto& u : j.at("ues"))
      std::cout << fmt::format("  ue {}: frames {} bits {} drops {} mcs {} snr {:.2f} dB\n",
                               u.at("id").get<std::uint32_t>(), u.at("frames").get<std::uint64_t>(),
                               u.at("bits_delivered").get<std::uint64_t>(), u.at("drops").get<std::uint64_t>(),
                               u.at("mcs").get<int>(), u.at("snr_db").get<double>());
}

void write_summary(const nlohmann::json& j, const std::string& path) {
  if (path.empty()) return;
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error(Errc::IoFailure, "cannot open " + path);
  f << j.dump(2) << "\n";
}

// ---------------------------------------------------------------- ue

struct UeArgs {
  std::uint32_t id = 0;
  std::string trace;
  std::string connect;
  std::size_t sparse_n = 0;
  double noise_power = 0.0;
  double signal_power = 1.0;
  std::uint64_t seed = 1;
  std::string cores;
  std::uint64_t offered_bits = 0;
  std::string mcs_table;
  bool stochastic_tb = false;
  std::string connect_timeout = "10s";
};

int run_ue_cmd(const UeArgs& a, const GlobalOptions& g) {
  UeConfig cfg;
  cfg.ue_id = a.id;
  cfg.trace = std::make_shared<const CirTrace>(load_trace(a.trace));
  const auto ep = parse_endpoint(a.connect);
  cfg.host = ep.host == "0.0.0.0" ? "127.0.0.1" : ep.host;
  cfg.port = ep.port;
  cfg.sparse_n = a.sparse_n;
  cfg.noise_power = a.noise_power;
  cfg.signal_power = a.signal_power;
  cfg.seed = a.seed;
  cfg.cores = parse_cores(a.cores);
  cfg.offered_bits_per_slot = a.offered_bits;
  if (!a.mcs_table.empty()) cfg.mcs_table = McsTable::load_json(a.mcs_table);
  cfg.tb.stochastic = a.stochastic_tb;
  cfg.tb.seed = a.seed;
  cfg.connect_timeout = std::chrono::duration_cast<std::chrono::milliseconds>(parse_duration(a.connect_timeout));
  MetricsStack metrics(g.metrics_addr);

  auto ue = run_ue(std::move(cfg), {}, {}, &metrics.twin);
  on_shutdown_signal([p = ue.get()] { p->stop(); });
  try {
    ue->wait();
  } catch (...) {
    on_shutdown_signal({});
    throw;
  }
  on_shutdown_signal({});
  const auto st = ue->stats();
  const auto link = ue->link_state();
  std::cout << fmt::format("ue {}: {} frames, last slot {}, out-of-order {}, bits {} drops {}\n", a.id, st.frames,
                           st.last_slot, st.out_of_order, link.bits_delivered, link.drops);
  return kExitOk;
}

// ---------------------------------------------------------------- run / gnb

struct RunArgs {
  std::string scenario;
  bool separate = false;
  std::string summary;
  std::string duration;
  std::string mode;
  std::string listen;
  std::string wait = "30s";
};

void apply_overrides(ScenarioConfig& sc, const RunArgs& a) {
  if (!a.duration.empty()) sc.duration_s = std::chrono::duration<double>(parse_duration(a.duration)).count();
  if (!a.mode.empty()) sc.mode = parse_mode(a.mode);
  if (!a.listen.empty()) sc.listen = a.listen;
  sc.validate();
}

nlohmann::json base_summary(const ScenarioConfig& sc) {
  return {{"mode", to_string(sc.mode)},
          {"num_ues", sc.ues.size()},
          {"slot_duration_ms", sc.slot_duration_ms},
          {"samples_per_slot", sc.samples_per_slot},
          {"sparse_n", sc.sparse_n},
          {"duration_s", sc.duration_s}};
}

int run_in_process(ScenarioConfig sc, const RunArgs& a, const GlobalOptions& g) {
  auto cfg = sc.to_session();  // loads every trace before anything starts
  MetricsStack metrics(metrics_addr_for(g, sc));
  cfg.metrics = &metrics.twin;
  cfg.gnb_hook = set_active_gnb;
  install_gnb_stop_handler();
  const auto res = run_local_session(cfg);

  auto j = base_summary(sc);
  j["compute"] = timing_summary(res.timing);
  j["ue_timeouts"] = res.gnb.ue_timeouts;
  j["separate_processes"] = false;
  j["ues"] = nlohmann::json::array();
  for (const auto& [id, st] : res.ue_stats) {
    const auto& l = res.links.at(id);
    j["ues"].push_back({{"id", id},
                        {"frames", st.frames},
                        {"out_of_order", st.out_of_order},
                        {"bits_delivered", l.bits_delivered},
                        {"drops", l.drops},
                        {"lost_bits", l.lost_bits},
                        {"buffer_bits", l.buffer_bits},
                        {"mcs", l.mcs},
                        {"snr_db", l.snr_db}});
  }
  print_summary(j);
  write_summary(j, a.summary);
  return kExitOk;
}

GnbConfig gnb_config_for(const ScenarioConfig& sc, bool need_traces) {
  GnbConfig g;
  g.mode = sc.mode;
  g.samples_per_slot = sc.samples_per_slot;
  g.slot_duration = sc.slot_duration();
  g.sparse_n = sc.sparse_n;
  g.seed = sc.seed;
  g.ue_timeout = std::chrono::nanoseconds(std::llround(sc.ue_timeout_ms * 1e6));
  g.cores = sc.gnb_cores;
  const auto ep = parse_endpoint(sc.listen);
  g.listen_host = ep.host;
  g.listen_port = ep.port;
  for (const auto& u : sc.ues)
    g.ues.push_back(UeChannel{u.id, need_traces || sc.mode == SessionMode::vanilla ? sc.materialize(u) : nullptr});
  return g;
}

nlohmann::json gnb_summary(const ScenarioConfig& sc, const GnbSession& gnb) {
  auto j = base_summary(sc);
  j["compute"] = timing_summary(gnb.timing());
  const auto st = gnb.stats();
  j["ue_timeouts"] = st.ue_timeouts;
  j["disconnects"] = st.disconnects;
  return j;
}

int run_gnb_loop(GnbSession& gnb, const ScenarioConfig& sc) {
  gnb.start(sc.num_slots());
  set_active_gnb(&gnb);
  install_gnb_stop_handler();
  try {
    gnb.wait();
  } catch (...) {
    set_active_gnb(nullptr);
    throw;
  }
  set_active_gnb(nullptr);
  return kExitOk;
}

struct Child {
  pid_t pid = -1;
  std::uint32_t ue_id = 0;
};

pid_t spawn(const std::vector<std::string>& args) {
  std::vector<char*> argv;
  for (const auto& s : args) argv.push_back(const_cast<char*>(s.c_str()));
  argv.push_back(nullptr);
  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  sigset_t empty;
  sigemptyset(&empty);
  posix_spawnattr_setsigmask(&attr, &empty);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETSIGMASK);
  pid_t pid = -1;
  const int rc = posix_spawn(&pid, "/proc/self/exe", nullptr, &attr, argv.data(), environ);
  posix_spawnattr_destroy(&attr);
  if (rc != 0) throw Error(Errc::SessionFailure, std::string("spawn failed: ") + std::strerror(rc));
  return pid;
}

void kill_all(std::vector<Child>& kids) {
  for (auto& k : kids)
    if (k.pid > 0) ::kill(k.pid, SIGTERM);
  for (auto& k : kids)
    if (k.pid > 0) {
      int status = 0;
      ::waitpid(k.pid, &status, 0);
      k.pid = -1;
    }
}

int run_separate(ScenarioConfig sc, const RunArgs& a, const GlobalOptions& g) {
  // every UE needs a trace file on disk
  const auto tmp = std::filesystem::temp_directory_path() / ("tinytwin-" + std::to_string(::getpid()));
  std::map<std::uint32_t, std::filesystem::path> trace_files;
  for (const auto& u : sc.ues) {
    if (u.trace) {
      trace_files[u.id] = std::filesystem::absolute(*u.trace);
    } else {
      std::filesystem::create_directories(tmp);
      const auto p = tmp / ("ue" + std::to_string(u.id) + ".cirt");
      write_trace(generate_trace(*u.generator), p);
      trace_files[u.id] = p;
    }
  }
  struct TmpCleanup {
    std::filesystem::path dir;
    ~TmpCleanup() {
      std::error_code ec;
      std::filesystem::remove_all(dir, ec);
    }
  } cleanup{tmp};

  MetricsStack metrics(metrics_addr_for(g, sc));
  auto gcfg = gnb_config_for(sc, false);
  if (gcfg.listen_host == "0.0.0.0") gcfg.listen_host = "127.0.0.1";
  auto gnb = run_gnb(gcfg, {}, {}, &metrics.twin);
  const auto endpoint = "127.0.0.1:" + std::to_string(gnb->port());

  std::vector<Child> kids;
  try {
    for (std::size_t i = 0; i < sc.ues.size(); ++i) {
      const auto& u = sc.ues[i];
      std::vector<std::string> args{"tinytwin"};
      if (!g.log_level.empty()) args.insert(args.end(), {"--log-level", g.log_level});
      args.insert(args.end(), {"ue", "--id", std::to_string(u.id), "--trace", trace_files[u.id].string(), "--connect",
                               endpoint, "--sparse-n", std::to_string(sc.sparse_n), "--noise-power",
                               fmt::format("{:.17g}", sc.noise_power), "--signal-power",
                               fmt::format("{:.17g}", sc.signal_power), "--seed", std::to_string(sc.seed),
                               "--offered-bits", std::to_string(sc.offered_bits_per_slot)});
      std::vector<unsigned> cores = u.cores;
      if (cores.empty() && sc.pinning) cores = default_ue_cores(i);
      if (!cores.empty()) {
        std::string s;
        for (auto c : cores) s += (s.empty() ? "" : ",") + std::to_string(c);
        args.insert(args.end(), {"--cores", s});
      }
      if (sc.mcs_table) args.insert(args.end(), {"--mcs-table", std::filesystem::absolute(*sc.mcs_table).string()});
      if (sc.stochastic_tb) args.push_back("--stochastic-tb");
      kids.push_back(Child{spawn(args), u.id});
    }
    gnb->accept_ues();
  } catch (...) {
    spdlog::error("startup failed; stopping {} UE processes", kids.size());
    kill_all(kids);
    throw;
  }

  try {
    run_gnb_loop(*gnb, sc);
  } catch (...) {
    kill_all(kids);
    throw;
  }
  int rc = kExitOk;
  for (auto& k : kids) {
    int status = 0;
    ::waitpid(k.pid, &status, 0);
    k.pid = -1;
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
      spdlog::error("UE {} process exited abnormally (status {})", k.ue_id, status);
      rc = kExitRuntime;
    }
  }
  auto j = gnb_summary(sc, *gnb);
  j["separate_processes"] = true;
  print_summary(j);
  write_summary(j, a.summary);
  return rc;
}

int run_cmd(const RunArgs& a, const GlobalOptions& g) {
  auto sc = ScenarioConfig::load(a.scenario);
  apply_overrides(sc, a);
  return a.separate ? run_separate(std::move(sc), a, g) : run_in_process(std::move(sc), a, g);
}

int gnb_cmd(const RunArgs& a, const GlobalOptions& g) {
  auto sc = ScenarioConfig::load(a.scenario);
  apply_overrides(sc, a);
  MetricsStack metrics(metrics_addr_for(g, sc));
  auto gcfg = gnb_config_for(sc, false);
  gcfg.handshake_timeout = std::chrono::duration_cast<std::chrono::milliseconds>(parse_duration(a.wait));
  auto gnb = run_gnb(gcfg, {}, {}, &metrics.twin);
  std::cout << "listening on " << gcfg.listen_host << ":" << gnb->port() << std::endl;
  gnb->accept_ues();
  run_gnb_loop(*gnb, sc);
  auto j = gnb_summary(sc, *gnb);
  print_summary(j);
  write_summary(j, a.summary);
  return kExitOk;
}

void add_run_options(CLI::App* sub, RunArgs& a) {
  sub->add_option("--duration", a.duration, "override the scenario's run duration, e.g. 5s");
  sub->add_option("--mode", a.mode, "override the scenario mode")->check(CLI::IsMember({"vanilla", "optimized"}));
  sub->add_option("--listen", a.listen, "override the gNB endpoint host:port");
  sub->add_option("--summary", a.summary, "write the run summary as JSON");
}

}  // namespace

void add_ue(CLI::App& app, const GlobalOptions& g, int& rc) {
  auto a = std::make_shared<UeArgs>();
  auto* sub = app.add_subcommand("ue", "run one UE endpoint against a gNB");
  sub->add_option("--id", a->id, "UE id")->required();
  sub->add_option("--trace", a->trace, "CIRT trace file")->required()->check(CLI::ExistingFile);
  sub->add_option("--connect", a->connect, "gNB host:port")->required();
  sub->add_option("--sparse-n", a->sparse_n, "top-n sparse taps (0 = full)")->capture_default_str();
  sub->add_option("--noise-power", a->noise_power, "downlink noise power per sample")->capture_default_str();
  sub->add_option("--signal-power", a->signal_power)->capture_default_str();
  sub->add_option("--seed", a->seed)->capture_default_str();
  sub->add_option("--cores", a->cores, "pin the UE worker, e.g. 2,3");
  sub->add_option("--offered-bits", a->offered_bits, "offered load per slot")->capture_default_str();
  sub->add_option("--mcs-table", a->mcs_table, "MCS table JSON")->check(CLI::ExistingFile);
  sub->add_flag("--stochastic-tb", a->stochastic_tb, "draw TB failures from a logistic curve");
  sub->add_option("--connect-timeout", a->connect_timeout)->capture_default_str();
  sub->callback([&g, &rc, a] {
    apply_globals(g);
    rc = run_ue_cmd(*a, g);
  });
}

void add_gnb(CLI::App& app, const GlobalOptions& g, int& rc) {
  auto a = std::make_shared<RunArgs>();
  auto* sub = app.add_subcommand("gnb", "run the gNB endpoint and wait for external UEs");
  sub->add_option("-c,--config", a->scenario, "scenario JSON")->required()->check(CLI::ExistingFile);
  add_run_options(sub, *a);
  sub->add_option("--wait", a->wait, "how long to wait for every UE to attach")->capture_default_str();
  sub->callback([&g, &rc, a] {
    apply_globals(g);
    rc = gnb_cmd(*a, g);
  });
}

void add_run(CLI::App& app, const GlobalOptions& g, int& rc) {
  auto a = std::make_shared<RunArgs>();
  auto* sub = app.add_subcommand("run", "run a complete scenario (gNB and every UE)");
  sub->add_option("scenario", a->scenario, "scenario JSON")->required()->check(CLI::ExistingFile);
  sub->add_flag("--separate-processes", a->separate, "one OS process per UE");
  add_run_options(sub, *a);
  sub->callback([&g, &rc, a] {
    apply_globals(g);
    rc = run_cmd(*a, g);
  });
}

}  // namespace tinytwin::cli
