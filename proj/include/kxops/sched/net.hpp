// Copyright 2026 The kxops Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstdint>
#include <cstring>
#include <mutex>
#include <optional>
#include <string>
#include <utility>

#include "kxops/core/error.hpp"
#include "kxops/core/records.hpp"

// Thin POSIX TCP helpers for the newline-delimited JSON protocol.
namespace kxops::sched::net {

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket() { close(); }
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      close();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  int fd() const noexcept { return fd_; }
  bool valid() const noexcept { return fd_ >= 0; }

  void close() {
    if (fd_ >= 0) ::close(std::exchange(fd_, -1));
  }
  // Unblocks a thread sitting in recv/accept on this socket.
  void shutdown() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
  }

 private:
  int fd_ = -1;
};

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  std::string str() const { return host + ":" + std::to_string(port); }
};

inline Endpoint parse_endpoint(const std::string& s) {
  const auto colon = s.rfind(':');
  if (colon == std::string::npos) fail(ErrorKind::kInvalidArgument, "expected host:port, got '" + s + "'");
  Endpoint e;
  e.host = s.substr(0, colon);
  try {
    const auto p = std::stoul(s.substr(colon + 1));
    if (p > 65535) throw std::out_of_range("port");
    e.port = static_cast<std::uint16_t>(p);
  } catch (const std::logic_error&) {
    fail(ErrorKind::kInvalidArgument, "bad port in '" + s + "'");
  }
  if (e.host.empty()) e.host = "127.0.0.1";
  return e;
}

[[noreturn]] inline void sys_fail(const std::string& what) {
  fail(ErrorKind::kIo, what + ": " + std::strerror(errno));
}

// Listening socket; port 0 picks an ephemeral port (see bound_port).
inline Socket listen_on(const Endpoint& ep, int backlog = 64) {
  Socket s(::socket(AF_INET, SOCK_STREAM, 0));
  if (!s.valid()) sys_fail("socket");
  int one = 1;
  ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  if (::inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) != 1) {
    fail(ErrorKind::kInvalidArgument, "bad IPv4 address " + ep.host);
  }
  if (::bind(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) sys_fail("bind " + ep.str());
  if (::listen(s.fd(), backlog) != 0) sys_fail("listen");
  return s;
}

inline std::uint16_t bound_port(const Socket& s) {
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  if (::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&addr), &len) != 0) sys_fail("getsockname");
  return ntohs(addr.sin_port);
}

inline std::optional<Socket> accept_one(const Socket& listener) {
  const int fd = ::accept(listener.fd(), nullptr, nullptr);
  if (fd < 0) return std::nullopt;
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return Socket(fd);
}

// Throws kUnavailable when nothing is listening.
inline Socket connect_to(const Endpoint& ep) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(ep.host.c_str(), std::to_string(ep.port).c_str(), &hints, &res) != 0 || !res) {
    fail(ErrorKind::kUnavailable, "cannot resolve " + ep.str());
  }
  Socket s(::socket(res->ai_family, res->ai_socktype, res->ai_protocol));
  const int rc = s.valid() ? ::connect(s.fd(), res->ai_addr, res->ai_addrlen) : -1;
  ::freeaddrinfo(res);
  if (rc != 0) fail(ErrorKind::kUnavailable, "cannot connect to " + ep.str() + ": " + std::strerror(errno));
  int one = 1;
  ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return s;
}

// One JSON document per line. Reads are single-consumer; writes are
// serialized so several threads may send on one connection.
class Channel {
 public:
  explicit Channel(Socket s) : sock_(std::move(s)) {}

  void send(const json& msg) {
    const std::string line = msg.dump() + "\n";
    std::lock_guard lock(write_mu_);
    std::size_t off = 0;
    while (off < line.size()) {
      const auto n = ::send(sock_.fd(), line.data() + off, line.size() - off, MSG_NOSIGNAL);
      if (n <= 0) {
        if (n < 0 && errno == EINTR) continue;
        sys_fail("send");
      }
      off += static_cast<std::size_t>(n);
    }
  }

  // Next message, or nothing once the peer has closed.
  std::optional<json> receive() {
    for (;;) {
      const auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (line.empty()) continue;
        try {
          return json::parse(line);
        } catch (const json::exception& e) {
          fail(ErrorKind::kFormat, std::string("malformed message: ") + e.what());
        }
      }
      char chunk[4096];
      const auto n = ::recv(sock_.fd(), chunk, sizeof chunk, 0);
      if (n == 0) return std::nullopt;
      if (n < 0) {
        if (errno == EINTR) continue;
        return std::nullopt;
      }
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  void shutdown() { sock_.shutdown(); }

 private:
  Socket sock_;
  std::string buffer_;
  std::mutex write_mu_;
};

}  // namespace kxops::sched::net
