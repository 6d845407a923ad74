// SPDX-License-Identifier: Apache-2.0
#include "socket.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <sys/uio.h>

#include <array>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <thread>

namespace tinytwin::net {

namespace {

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

sockaddr_in resolve(const std::string& host, std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (host.empty() || host == "*" || host == "0.0.0.0") {
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    return addr;
  }
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr)
    throw Error(Errc::InvalidArgument, "cannot resolve host '" + host + "'");
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  ::freeaddrinfo(res);
  return addr;
}

}  // namespace

Socket& Socket::operator=(Socket&& o) noexcept {
  if (this != &o) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = o.fd_;
    o.fd_ = -1;
  }
  return *this;
}

Socket::~Socket() {
  if (fd_ >= 0) ::close(fd_);
}

Socket Socket::connect(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout) {
  const auto addr = resolve(host, port);
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  // The server may still be coming up; retry refused connections until the deadline.
  while (true) {
    Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!s.valid()) throw Error(Errc::ConnectionLost, std::string("socket(): ") + std::strerror(errno));
    if (::connect(s.fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) == 0) {
      set_nodelay(s.fd_);
      return s;
    }
    const int err = errno;
    if (std::chrono::steady_clock::now() >= deadline)
      throw Error(Errc::ConnectionLost,
                  "connect to " + host + ":" + std::to_string(port) + " failed: " + std::strerror(err));
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

bool Socket::send_all(std::span<const std::byte> bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const auto n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

bool Socket::send_parts(std::span<const std::byte> head, std::span<const std::byte> body) {
  std::size_t off = 0;
  const std::size_t total = head.size() + body.size();
  while (off < total) {
    iovec iov[2];
    int n_iov = 0;
    if (off < head.size()) {
      iov[n_iov++] = {const_cast<std::byte*>(head.data() + off), head.size() - off};
      iov[n_iov++] = {const_cast<std::byte*>(body.data()), body.size()};
    } else {
      const auto b = off - head.size();
      iov[n_iov++] = {const_cast<std::byte*>(body.data() + b), body.size() - b};
    }
    msghdr mh{};
    mh.msg_iov = iov;
    mh.msg_iovlen = static_cast<std::size_t>(n_iov);
    const auto n = ::sendmsg(fd_, &mh, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    off += static_cast<std::size_t>(n);
  }
  return true;
}

bool Socket::recv_exact(std::span<std::byte> buf) {
  std::size_t got = 0;
  while (got < buf.size()) {
    const auto n = ::recv(fd_, buf.data() + got, buf.size() - got, 0);
    if (n == 0) return false;
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    got += static_cast<std::size_t>(n);
  }
  return true;
}

bool Socket::wait_readable(std::chrono::milliseconds timeout) {
  pollfd p{fd_, POLLIN, 0};
  while (true) {
    const int r = ::poll(&p, 1, static_cast<int>(timeout.count()));
    if (r < 0 && errno == EINTR) continue;
    return r > 0;
  }
}

void Socket::shutdown() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

bool Socket::send_message(const WireMessage& msg) { return send_all(encode(msg)); }

WireMessage Socket::recv_message() {
  std::array<std::byte, kWireHeaderSize> hdr{};
  if (!recv_exact(hdr)) throw Error(Errc::ConnectionLost, "peer closed the connection");
  const auto hr = parse_header(hdr);
  if (!hr.header) throw Error(hr.error, "malformed frame header");
  WireMessage m{hr.header->type, hr.header->ue_id, hr.header->slot_index,
                std::vector<std::byte>(hr.header->payload_len)};
  if (!recv_exact(m.payload)) throw Error(Errc::ConnectionLost, "connection closed mid-payload");
  return m;
}

Listener::Listener(const std::string& host, std::uint16_t port) {
  sock_ = Socket(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!sock_.valid()) throw Error(Errc::BindFailure, std::string("socket(): ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(sock_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  const auto addr = resolve(host, port);
  if (::bind(sock_.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0)
    throw Error(Errc::BindFailure, "bind " + host + ":" + std::to_string(port) + ": " + std::strerror(errno));
  if (::listen(sock_.fd(), 64) != 0) throw Error(Errc::BindFailure, std::string("listen: ") + std::strerror(errno));
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(sock_.fd(), reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
}

Socket Listener::accept(std::chrono::milliseconds timeout) {
  if (!sock_.wait_readable(timeout)) return {};
  const int fd = ::accept4(sock_.fd(), nullptr, nullptr, SOCK_CLOEXEC);
  if (fd < 0) return {};
  set_nodelay(fd);
  return Socket(fd);
}

void Listener::close() { sock_ = Socket(); }

}  // namespace tinytwin::net

namespace tinytwin {

Endpoint parse_endpoint(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) throw Error(Errc::InvalidArgument, "expected host:port, got '" + text + "'");
  Endpoint ep;
  ep.host = text.substr(0, colon);
  if (ep.host.empty()) ep.host = "0.0.0.0";
  unsigned port = 0;
  const auto* b = text.data() + colon + 1;
  const auto* e = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(b, e, port);
  if (ec != std::errc{} || ptr != e || port > 65535)
    throw Error(Errc::InvalidArgument, "bad port in '" + text + "'");
  ep.port = static_cast<std::uint16_t>(port);
  return ep;
}

}  // namespace tinytwin
