// SPDX-License-Identifier: Apache-2.0
// Minimal blocking TCP transport for the fronthaul.
#pragma once

#include <chrono>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tinytwin/fronthaul.hpp"
#include "tinytwin/wire.hpp"

namespace tinytwin::net {

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
  Socket& operator=(Socket&& o) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket();

  static Socket connect(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout);

  bool valid() const { return fd_ >= 0; }
  int fd() const { return fd_; }

  /// Returns false if the peer is gone.
  bool send_all(std::span<const std::byte> bytes);
  /// Gathered send of header + payload in one syscall where possible.
  bool send_parts(std::span<const std::byte> head, std::span<const std::byte> body);
  /// Fills `buf` completely; false on EOF or error.
  bool recv_exact(std::span<std::byte> buf);
  /// Waits until readable; false on timeout.
  bool wait_readable(std::chrono::milliseconds timeout);
  void shutdown();

  bool send_message(const WireMessage& msg);
  /// Reads one framed message. Throws Error(ConnectionLost) on EOF and the
  /// decode error code on malformed framing.
  WireMessage recv_message();

 private:
  int fd_ = -1;
};

class Listener {
 public:
  Listener(const std::string& host, std::uint16_t port);
  std::uint16_t port() const { return port_; }
  /// Returns an invalid socket on timeout.
  Socket accept(std::chrono::milliseconds timeout);
  void close();

 private:
  Socket sock_;
  std::uint16_t port_ = 0;
};

}  // namespace tinytwin::net
