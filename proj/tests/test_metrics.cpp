// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"
#include "test_util.hpp"
#include "tinytwin/metrics.hpp"

#include <httplib.h>

#include <regex>
#include <set>
#include <sstream>

using namespace testutil;
using tt::Errc;

namespace {

// Line-level checker for the 0.0.4 text format, kept independent of the renderer.
std::vector<std::string> exposition_errors(const std::string& text) {
  static const std::regex help(R"(^# HELP ([a-zA-Z_:][a-zA-Z0-9_:]*) .*$)");
  static const std::regex type(R"(^# TYPE ([a-zA-Z_:][a-zA-Z0-9_:]*) (counter|gauge|histogram|summary|untyped)$)");
  static const std::regex sample(
      R"(^([a-zA-Z_:][a-zA-Z0-9_:]*)(\{([a-zA-Z_][a-zA-Z0-9_]*="([^"\\\n]|\\[\\"n])*")(,[a-zA-Z_][a-zA-Z0-9_]*="([^"\\\n]|\\[\\"n])*")*\})? ([-+]?([0-9]*\.?[0-9]+([eE][-+]?[0-9]+)?|Inf)|NaN)$)");
  std::vector<std::string> errs;
  std::set<std::string> typed;
  std::string current_type;
  std::string current_family;
  std::istringstream in(text);
  std::string line;
  if (!text.empty() && text.back() != '\n') errs.push_back("missing trailing newline");
  while (std::getline(in, line)) {
    std::smatch m;
    if (std::regex_match(line, m, help)) continue;
    if (std::regex_match(line, m, type)) {
      if (!typed.insert(m[1]).second) errs.push_back("duplicate TYPE " + line);
      current_family = m[1];
      current_type = m[2];
      continue;
    }
    if (line.rfind("#", 0) == 0) continue;
    if (!std::regex_match(line, m, sample)) {
      errs.push_back("bad sample line: " + line);
      continue;
    }
    const std::string name = m[1];
    bool belongs = name == current_family;
    if (current_type == "histogram")
      for (const char* suf : {"_bucket", "_sum", "_count"})
        belongs |= name == current_family + suf;
    if (!belongs) errs.push_back("sample outside its family: " + line);
    if (current_type == "histogram" && name == current_family + "_bucket" && line.find("le=\"") == std::string::npos)
      errs.push_back("bucket without le: " + line);
  }
  return errs;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("checker rejects malformed text") {
  CHECK(exposition_errors("# TYPE a counter\na 1\n").empty());
  CHECK_FALSE(exposition_errors("# TYPE a counter\na{x=1} 1\n").empty());
  CHECK_FALSE(exposition_errors("# TYPE a counter\nb 1\n").empty());
  CHECK_FALSE(exposition_errors("# TYPE a counter\na one\n").empty());
}

TEST_CASE("counters, gauges and histograms render valid exposition text") {
  tt::MetricsRegistry reg;
  auto& c = reg.counter("t_requests_total", "Requests\nserved", {{"path", "a\"b\\c"}});
  c.increment();
  c.increment(2.5);
  CHECK(c.value() == 3.5);
  auto& g = reg.gauge("t_temp", "Temperature");
  g.set(-1.25);
  auto& h = reg.histogram("t_latency_seconds", "Latency", {0.1, 1.0}, {{"ue", "1"}});
  h.observe(0.05);
  h.observe(0.1);
  h.observe(0.5);
  h.observe(7.0);
  const auto snap = h.snapshot();
  CHECK(snap.cumulative == std::vector<std::uint64_t>{2, 3, 4});
  CHECK(snap.count == 4);
  CHECK(snap.sum == doctest::Approx(7.65));

  const auto text = reg.render();
  const auto errs = exposition_errors(text);
  for (const auto& e : errs) MESSAGE(e);
  CHECK(errs.empty());
  CHECK(text.find("t_requests_total{path=\"a\\\"b\\\\c\"} 3.5\n") != std::string::npos);
  CHECK(text.find("# HELP t_requests_total Requests\\nserved\n") != std::string::npos);
  CHECK(text.find("t_latency_seconds_bucket{ue=\"1\",le=\"+Inf\"} 4\n") != std::string::npos);
  CHECK(text.find("t_temp -1.25\n") != std::string::npos);
}

TEST_CASE("same name and labels return the same instrument") {
  tt::MetricsRegistry reg;
  auto& a = reg.counter("x_total", "x", {{"ue", "1"}});
  auto& b = reg.counter("x_total", "x", {{"ue", "1"}});
  auto& c = reg.counter("x_total", "x", {{"ue", "2"}});
  CHECK(&a == &b);
  CHECK(&a != &c);
  CHECK(error_code_of([&] { reg.gauge("x_total", "x"); }) == Errc::InvalidArgument);
  CHECK(error_code_of([] { tt::Histogram({1.0, 1.0}); }) == Errc::InvalidArgument);
}

TEST_CASE("twin metrics track link state deltas") {
  tt::MetricsRegistry reg;
  tt::TwinMetrics tm(reg);
  auto h = tm.ue(4);
  tt::LinkState s;
  s.snr_db = 12.5;
  s.mcs = 16;
  s.bits_delivered = 1000;
  s.drops = 2;
  s.buffer_bits = 300;
  tt::TwinMetrics::record_link(h, s);
  s.bits_delivered = 1500;
  tt::TwinMetrics::record_link(h, s);
  tm.observe_slot(0.0007);
  tm.count_ue_timeout(4);
  CHECK(h.bits_delivered->value() == 1500);
  CHECK(h.drops->value() == 2);
  const auto text = reg.render();
  CHECK(exposition_errors(text).empty());
  for (const char* name : {"tinytwin_ue_snr_db{ue=\"4\"} 12.5", "tinytwin_ue_mcs{ue=\"4\"} 16",
                           "tinytwin_ue_buffer_bits{ue=\"4\"} 300", "tinytwin_ue_bits_delivered_total{ue=\"4\"} 1500",
                           "tinytwin_ue_drops_total{ue=\"4\"} 2", "tinytwin_ue_timeouts_total{ue=\"4\"} 1",
                           "tinytwin_slot_compute_seconds_count 1"})
    CHECK_MESSAGE(text.find(name) != std::string::npos, name);
}

TEST_CASE("HTTP endpoint serves the registry") {
  tt::MetricsRegistry reg;
  reg.gauge("t_up", "Up").set(1);
  tt::MetricsServer server(reg, "127.0.0.1", 0);
  REQUIRE(server.port() != 0);
  httplib::Client cli("127.0.0.1", server.port());
  auto res = cli.Get("/metrics");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->get_header_value("Content-Type").find("text/plain") == 0);
  CHECK(res->body.find("t_up 1\n") != std::string::npos);
  CHECK(exposition_errors(res->body).empty());
  auto missing = cli.Get("/nope");
  REQUIRE(missing);
  CHECK(missing->status == 404);
}

TEST_CASE("bind failure is typed") {
  tt::MetricsRegistry reg;
  tt::MetricsServer first(reg, "127.0.0.1", 0);
  CHECK(error_code_of([&] { tt::MetricsServer second(reg, "127.0.0.1", first.port()); }) == Errc::BindFailure);
  CHECK(error_code_of([&] { tt::serve_metrics(reg, "no-port"); }) == Errc::InvalidArgument);
}

}
