// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tinytwin/error.hpp"

namespace tinytwin::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitValidation = 2;

struct GlobalOptions {
  std::string log_level;
  std::string metrics_addr;
};

/// "60s", "500ms", "2m", "1.5" (seconds).
std::chrono::nanoseconds parse_duration(const std::string& text);
std::vector<unsigned> parse_cores(const std::string& text);
/// Empty level falls back to $TINYTWIN_LOG, then info.
void configure_logging(const std::string& level);
int exit_code_for(Errc code);

/// Invokes `fn` on SIGINT/SIGTERM (from a dedicated thread).
void on_shutdown_signal(std::function<void()> fn);
void block_shutdown_signals();

void add_gen_trace(CLI::App& app, const GlobalOptions& g, int& rc);
void add_inspect(CLI::App& app, const GlobalOptions& g, int& rc);
void add_gnb(CLI::App& app, const GlobalOptions& g, int& rc);
void add_ue(CLI::App& app, const GlobalOptions& g, int& rc);
void add_run(CLI::App& app, const GlobalOptions& g, int& rc);
void add_bench(CLI::App& app, const GlobalOptions& g, int& rc);

}  // namespace tinytwin::cli

namespace tinytwin::cli {
/// Re-applies --log-level once parsing is done.
inline void apply_globals(const GlobalOptions& g) {
  if (!g.log_level.empty()) configure_logging(g.log_level);
}
}  // namespace tinytwin::cli
