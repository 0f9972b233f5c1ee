#ifndef CTHIDE_SOCKET_TRANSPORT_HPP
#define CTHIDE_SOCKET_TRANSPORT_HPP

#include "cthide/tracing.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

namespace cthide {

namespace detail {

inline std::system_error sys_error(const char* what) {
  return std::system_error(errno, std::generic_category(), what);
}

inline void send_all(int fd, const std::string& data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t r = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw sys_error("send");
    }
    sent += static_cast<std::size_t>(r);
  }
}

class Fd {
 public:
  explicit Fd(int fd = -1) : fd_(fd) {}
  Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Fd& operator=(Fd&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  ~Fd() { reset(); }

  int get() const { return fd_; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_;
};

}  // namespace detail

/// TCP front end for a ServerState on 127.0.0.1. Lines from all connections
/// are handled one at a time in arrival order. A connection becomes the
/// delivery route for every user id it reports for; alerts for users without
/// a route stay queued in the ServerState until one appears. A malformed
/// line gets an `ERROR<TAB>reason` reply and the connection is closed.
class SocketServer {
 public:
  explicit SocketServer(ServerState& state, std::uint16_t port = 0) : state_(state) {
    listener_ = detail::Fd(::socket(AF_INET, SOCK_STREAM, 0));
    if (listener_.get() < 0) throw detail::sys_error("socket");
    int one = 1;
    ::setsockopt(listener_.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::bind(listener_.get(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
      throw detail::sys_error("bind");
    }
    if (::listen(listener_.get(), 16) < 0) throw detail::sys_error("listen");
    socklen_t len = sizeof addr;
    ::getsockname(listener_.get(), reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
  }

  std::uint16_t port() const { return port_; }
  std::size_t connections() const { return conns_.size(); }

  /// Waits up to timeout_ms for activity and handles everything ready.
  void poll_once(int timeout_ms) {
    std::vector<pollfd> fds;
    fds.push_back({listener_.get(), POLLIN, 0});
    for (const auto& [fd, conn] : conns_) fds.push_back({fd, POLLIN, 0});
    const int ready = ::poll(fds.data(), fds.size(), timeout_ms);
    if (ready < 0) {
      if (errno == EINTR) return;
      throw detail::sys_error("poll");
    }
    if (fds[0].revents & POLLIN) {
      const int fd = ::accept(listener_.get(), nullptr, nullptr);
      if (fd >= 0) conns_.emplace(fd, Conn{detail::Fd(fd), {}});
    }
    for (std::size_t i = 1; i < fds.size(); ++i) {
      if (fds[i].revents & (POLLIN | POLLHUP | POLLERR)) read_from(fds[i].fd);
    }
  }

  void run(const std::atomic<bool>& stop, int tick_ms = 20) {
    while (!stop.load()) poll_once(tick_ms);
  }

 private:
  struct Conn {
    detail::Fd fd;
    std::string buffer;
  };

  void read_from(int fd) {
    char chunk[4096];
    const ssize_t r = ::recv(fd, chunk, sizeof chunk, 0);
    if (r <= 0) {
      drop(fd);
      return;
    }
    auto& buf = conns_.at(fd).buffer;
    buf.append(chunk, static_cast<std::size_t>(r));
    std::size_t nl;
    while (conns_.contains(fd) && (nl = conns_.at(fd).buffer.find('\n')) != std::string::npos) {
      auto& b = conns_.at(fd).buffer;
      const std::string line = b.substr(0, nl);
      b.erase(0, nl + 1);
      handle(fd, line);
    }
  }

  void handle(int fd, const std::string& line) {
    std::vector<Delivery> deliveries;
    try {
      const auto msg = parse_wire(line);
      const auto* report = std::get_if<ReportMsg>(&msg);
      if (!report) throw ProtocolError("server accepts REPORT lines only");
      routes_[report->user_id] = fd;
      deliveries = state_.handle(*report);
      flush(report->user_id);
    } catch (const ProtocolError& e) {
      try {
        detail::send_all(fd, std::string("ERROR\t") + e.what() + "\n");
      } catch (const std::system_error&) {
      }
      drop(fd);
      return;
    }
    for (const auto& d : deliveries) flush(d.recipient);
  }

  void flush(const std::string& user) {
    const auto route = routes_.find(user);
    if (route == routes_.end()) return;
    std::string out;
    for (const auto& alert : state_.take_alerts(user)) out += to_wire(alert) + "\n";
    if (out.empty()) return;
    try {
      detail::send_all(route->second, out);
    } catch (const std::system_error&) {
      drop(route->second);
    }
  }

  void drop(int fd) {
    std::erase_if(routes_, [fd](const auto& kv) { return kv.second == fd; });
    conns_.erase(fd);
  }

  ServerState& state_;
  detail::Fd listener_;
  std::uint16_t port_ = 0;
  std::map<int, Conn> conns_;
  std::map<std::string, int> routes_;
};

/// Blocking line-oriented client for SocketServer.
class LineClient {
 public:
  explicit LineClient(std::uint16_t port) {
    fd_ = detail::Fd(::socket(AF_INET, SOCK_STREAM, 0));
    if (fd_.get() < 0) throw detail::sys_error("socket");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::connect(fd_.get(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
      throw detail::sys_error("connect");
    }
  }

  void send_line(const std::string& line) { detail::send_all(fd_.get(), line + "\n"); }

  /// Next complete line, or nullopt on timeout or closed connection.
  std::optional<std::string> read_line(int timeout_ms) {
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    while (true) {
      if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                            deadline - std::chrono::steady_clock::now())
                            .count();
      if (left <= 0) return std::nullopt;
      pollfd pfd{fd_.get(), POLLIN, 0};
      if (::poll(&pfd, 1, static_cast<int>(left)) <= 0) continue;
      char chunk[4096];
      const ssize_t r = ::recv(fd_.get(), chunk, sizeof chunk, 0);
      if (r <= 0) return std::nullopt;
      buffer_.append(chunk, static_cast<std::size_t>(r));
    }
  }

 private:
  detail::Fd fd_;
  std::string buffer_;
};

}  // namespace cthide

#endif  // CTHIDE_SOCKET_TRANSPORT_HPP
