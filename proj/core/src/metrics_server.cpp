// SPDX-License-Identifier: Apache-2.0
#include <httplib.h>

#include "socket.hpp"
#include "tinytwin/error.hpp"
#include "tinytwin/metrics.hpp"

namespace tinytwin {

struct MetricsServer::Impl {
  httplib::Server server;
  std::thread thread;
};

MetricsServer::MetricsServer(const MetricsRegistry& registry, const std::string& host, std::uint16_t port)
    : impl_(std::make_unique<Impl>()) {
  impl_->server.Get("/metrics", [&registry](const httplib::Request&, httplib::Response& res) {
    res.set_content(registry.render(), "text/plain; version=0.0.4; charset=utf-8");
  });
  // httplib's default also sets SO_REUSEPORT, which would let a second
  // exporter silently share the port.
  impl_->server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
  int bound = 0;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else {
    bound = impl_->server.bind_to_port(host, port) ? port : -1;
  }
  if (bound <= 0) throw Error(Errc::BindFailure, "cannot bind metrics endpoint " + host + ":" + std::to_string(port));
  port_ = static_cast<std::uint16_t>(bound);
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

MetricsServer::~MetricsServer() { stop(); }

void MetricsServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::unique_ptr<MetricsServer> serve_metrics(const MetricsRegistry& registry, const std::string& endpoint) {
  const auto ep = parse_endpoint(endpoint);
  return std::make_unique<MetricsServer>(registry, ep.host, ep.port);
}

}  // namespace tinytwin
