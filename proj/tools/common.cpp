// SPDX-License-Identifier: Apache-2.0
#include <pthread.h>
#include <signal.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdlib>
#include <mutex>
#include <sstream>
#include <thread>

#include "commands.hpp"

namespace tinytwin::cli {

std::chrono::nanoseconds parse_duration(const std::string& text) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(text, &pos);
  } catch (const std::exception&) {
    throw Error(Errc::InvalidArgument, "bad duration '" + text + "'");
  }
  const auto unit = text.substr(pos);
  double scale = 1e9;
  if (unit.empty() || unit == "s")
    scale = 1e9;
  else if (unit == "ms")
    scale = 1e6;
  else if (unit == "us")
    scale = 1e3;
  else if (unit == "m" || unit == "min")
    scale = 60e9;
  else
    throw Error(Errc::InvalidArgument, "bad duration unit in '" + text + "'");
  if (!(v >= 0) || !std::isfinite(v)) throw Error(Errc::InvalidArgument, "bad duration '" + text + "'");
  return std::chrono::nanoseconds(std::llround(v * scale));
}

std::vector<unsigned> parse_cores(const std::string& text) {
  std::vector<unsigned> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t pos = 0;
      const auto v = std::stoul(item, &pos);
      if (pos != item.size()) throw std::invalid_argument(item);
      out.push_back(static_cast<unsigned>(v));
    } catch (const std::exception&) {
      throw Error(Errc::InvalidArgument, "bad core list '" + text + "'");
    }
  }
  return out;
}

void configure_logging(const std::string& level) {
  if (!spdlog::get("tinytwin")) spdlog::set_default_logger(spdlog::stderr_color_mt("tinytwin"));
  std::string lv = level;
  if (lv.empty())
    if (const char* env = std::getenv("TINYTWIN_LOG")) lv = env;
  if (lv.empty()) lv = "info";
  const auto parsed = spdlog::level::from_str(lv);
  if (parsed == spdlog::level::off && lv != "off")
    throw Error(Errc::InvalidArgument, "unknown log level '" + lv + "'");
  spdlog::set_level(parsed);
  spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
}

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::InvalidArgument:
    case Errc::NyquistViolation:
    case Errc::GridTooShort:
    case Errc::MalformedRow:
    case Errc::NonMonotonicTime:
    case Errc::TapLengthMismatch:
    case Errc::NonPositiveNoise:
    case Errc::InvalidCore:
    case Errc::NonFiniteTap:
      return kExitValidation;
    default:
      return kExitRuntime;
  }
}

namespace {
std::mutex g_sig_mu;
std::function<void()> g_sig_fn;
std::once_flag g_sig_thread;
}  // namespace

void block_shutdown_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
}

void on_shutdown_signal(std::function<void()> fn) {
  {
    std::lock_guard lk(g_sig_mu);
    g_sig_fn = std::move(fn);
  }
  std::call_once(g_sig_thread, [] {
    std::thread([] {
      sigset_t set;
      sigemptyset(&set);
      sigaddset(&set, SIGINT);
      sigaddset(&set, SIGTERM);
      while (true) {
        int sig = 0;
        if (sigwait(&set, &sig) != 0) continue;
        spdlog::warn("signal {} received, shutting down", sig);
        std::function<void()> f;
        {
          std::lock_guard lk(g_sig_mu);
          f = g_sig_fn;
        }
        if (f) f();
        else std::_Exit(128 + sig);
      }
    }).detach();
  });
}

}  // namespace tinytwin::cli
