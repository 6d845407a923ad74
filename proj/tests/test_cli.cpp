// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"
#include "test_util.hpp"

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <map>
#include <regex>
#include <sstream>

using namespace testutil;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

std::string quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

Result run(const std::vector<std::string>& args, const std::string& env = "") {
  std::string cmd = env.empty() ? "" : env + " ";
  cmd += quote(TINYTWIN_BIN);
  for (const auto& a : args) cmd += " " + quote(a);
  cmd += " 2>&1";
  Result r;
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), p)) > 0) r.out.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kConfigs = std::string(TINYTWIN_SOURCE_DIR) + "/configs/";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("help and usage errors") {
  CHECK(run({"--help"}).code == 0);
  CHECK(run({}).code == 2);
  CHECK(run({"no-such-command"}).code == 2);
  CHECK(run({"gen-trace", "--profile", "uma"}).code == 2);  // -o missing
  CHECK(run({"--log-level", "shouting", "inspect", "x"}).code == 2);
}

TEST_CASE("gen-trace is deterministic") {
  TempDir dir;
  const auto a = (dir / "a.cirt").string(), b = (dir / "b.cirt").string();
  const auto r1 = run({"gen-trace", "--profile", "uma", "--speed-kmh", "5", "--duration", "60s", "--seed", "1", "-o", a});
  REQUIRE(r1.code == 0);
  CHECK(r1.out.find("mean power") != std::string::npos);
  CHECK(r1.out.find("doppler f_d  16.2") != std::string::npos);
  REQUIRE(run({"gen-trace", "--profile", "uma", "--speed-kmh", "5", "--duration", "60s", "--seed", "1", "-o", b}).code == 0);
  const auto ba = slurp(a);
  CHECK(ba.size() > 42);
  CHECK(ba == slurp(b));
  CHECK(std::hash<std::string>{}(ba) == std::hash<std::string>{}(slurp(b)));
}

TEST_CASE("60 km/h records the expected Doppler") {
  TempDir dir;
  const auto out = (dir / "fast.cirt").string();
  REQUIRE(run({"gen-trace", "--profile", "uma", "--speed-kmh", "60", "--duration", "1s", "-o", out}).code == 0);
  const auto meta = nlohmann::json::parse(slurp(dir / "fast.meta.json"));
  CHECK(meta.at("doppler_hz").get<double>() == doctest::Approx(194.4).epsilon(0.002));
}

TEST_CASE("periodic trace and inspect") {
  TempDir dir;
  const auto out = (dir / "p.cirt").string();
  REQUIRE(run({"gen-trace", "--profile", "synthetic-periodic", "--period", "10s", "--snr", "20:0", "--duration", "20s",
               "-o", out})
              .code == 0);
  const auto csv = (dir / "p.csv").string();
  const auto r = run({"inspect", out, "--power-csv", csv});
  REQUIRE(r.code == 0);
  std::ifstream in(csv);
  std::string line;
  int rows = -1;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 20000);
}

TEST_CASE("inspect of an identity trace") {
  TempDir dir;
  const auto out = (dir / "id.cirt").string();
  REQUIRE(run({"gen-trace", "--profile", "identity", "--duration", "1s", "-o", out}).code == 0);
  const auto r = run({"inspect", out});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("mean power    0.00 dB") != std::string::npos);
  CHECK(r.out.find("active bins   1\n") != std::string::npos);
  const auto j = run({"inspect", "--json", out});
  REQUIRE(j.code == 0);
  CHECK(nlohmann::json::parse(j.out).at("active_bins") == 1);
}

TEST_CASE("inspect of a truncated file is a runtime failure") {
  TempDir dir;
  const auto out = dir / "t.cirt";
  REQUIRE(run({"gen-trace", "--profile", "identity", "--duration", "1s", "-o", out.string()}).code == 0);
  std::filesystem::resize_file(out, std::filesystem::file_size(out) - 3);
  const auto r = run({"inspect", out.string()});
  CHECK(r.code == 1);
  CHECK(r.out.find("Truncated") != std::string::npos);
}

TEST_CASE("invalid generator input exits 2 and writes nothing") {
  TempDir dir;
  const auto out = dir / "bad.cirt";
  CHECK(run({"gen-trace", "--profile", "uma", "--doppler-hz", "600", "-o", out.string()}).code == 2);
  CHECK(run({"gen-trace", "--profile", "mars", "-o", out.string()}).code == 2);
  CHECK(run({"gen-trace", "--profile", "uma", "--speed-kmh", "5", "--doppler-hz", "5", "-o", out.string()}).code == 2);
  CHECK_FALSE(std::filesystem::exists(out));
  CHECK_FALSE(std::filesystem::exists(dir / "bad.meta.json"));
}

TEST_CASE("identity scenario runs 5000 slots") {
  TempDir dir;
  const auto summary = dir / "s.json";
  const auto r = run({"run", kConfigs + "identity.json", "--summary", summary.string()});
  INFO(r.out);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("run complete: 5000 slots at 1 ms") != std::string::npos);
  const auto j = nlohmann::json::parse(slurp(summary));
  CHECK(j.dump().find("5000") != std::string::npos);
}

TEST_CASE("a scenario with a missing trace fails validation before launch") {
  TempDir dir;
  std::ofstream(dir / "s.json") << R"({"ues": [{"id": 0, "trace": "missing.cirt"}]})";
  const auto r = run({"run", (dir / "s.json").string(), "--summary", (dir / "out.json").string()});
  CHECK(r.code == 2);
  CHECK(r.out.find("listening") == std::string::npos);
  CHECK(r.out.find("run complete") == std::string::npos);
  CHECK_FALSE(std::filesystem::exists(dir / "out.json"));
}

TEST_CASE("separate processes give the same link outcome as in-process") {
  const auto a = run({"run", kConfigs + "mixed-3ue.json", "--duration", "1s"});
  const auto b = run({"run", kConfigs + "mixed-3ue.json", "--duration", "1s", "--separate-processes"});
  INFO(a.out);
  INFO(b.out);
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  // in-process summary lines and per-process UE lines differ in layout; compare (id, bits)
  auto ue_lines = [](const std::string& s) {
    static const std::regex re(R"(^\s*ue (\d+):.* bits (\d+) drops (\d+))");
    std::map<std::string, std::string> v;
    std::istringstream in(s);
    std::string line;
    std::smatch m;
    while (std::getline(in, line))
      if (std::regex_search(line, m, re)) v[m[1]] = std::string(m[2]) + "/" + std::string(m[3]);
    return v;
  };
  CHECK(ue_lines(a.out).size() == 3);
  CHECK(ue_lines(a.out) == ue_lines(b.out));
}

TEST_CASE("metrics endpoint flag is validated") {
  CHECK(run({"--metrics-addr", "nonsense", "run", kConfigs + "identity.json", "--duration", "10ms"}).code == 2);
}

TEST_CASE("TINYTWIN_LOG controls verbosity") {
  const auto quiet = run({"run", kConfigs + "identity.json", "--duration", "50ms"}, "TINYTWIN_LOG=off");
  const auto loud = run({"run", kConfigs + "identity.json", "--duration", "50ms"}, "TINYTWIN_LOG=debug");
  REQUIRE(quiet.code == 0);
  REQUIRE(loud.code == 0);
  CHECK(loud.out.size() > quiet.out.size());
}

TEST_CASE("tiny bench writes a report") {
  TempDir dir;
  const auto out = dir / "bench.json";
  const auto r = run({"bench", "--ues", "1", "--taps", "1,4", "--modes", "vanilla,optimized", "--duration", "100ms",
                      "--samples-per-slot", "256", "-o", out.string()});
  INFO(r.out);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("| vanilla | 1 | 4 |") != std::string::npos);
  const auto j = nlohmann::json::parse(slurp(out));
  CHECK(j.at("format") == "tinytwin-bench");
  CHECK(j.at("reports").size() == 4);
  CHECK(run({"bench", "--ues", "0", "--duration", "100ms"}).code == 2);
}

}
