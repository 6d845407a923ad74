// SPDX-License-Identifier: Apache-2.0
#include <spdlog/spdlog.h>

#include <iostream>

#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace tinytwin::cli;
  block_shutdown_signals();
  try {
    configure_logging("");
  } catch (const tinytwin::Error& e) {
    std::cerr << e.what() << "\n";
    return kExitValidation;
  }

  CLI::App app{"tinytwin: trace-driven channel emulator for a software gNB/UE pair"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off (default: $TINYTWIN_LOG or info)")
      ->option_text("LEVEL");
  app.add_option("--metrics-addr", g.metrics_addr, "serve /metrics on host:port");
  app.set_version_flag("--version", "tinytwin 0.1.0");

  int rc = kExitOk;
  add_gen_trace(app, g, rc);
  add_inspect(app, g, rc);
  add_gnb(app, g, rc);
  add_ue(app, g, rc);
  add_run(app, g, rc);
  add_bench(app, g, rc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  } catch (const tinytwin::Error& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitRuntime;
  }
  return rc;
}
