#ifndef INTLAB_CLIENT_HPP
#define INTLAB_CLIENT_HPP

#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <string>
#include <string_view>

#include "intlab/errors.hpp"
#include "intlab/net.hpp"

namespace intlab {

/// One client connection to a controller. send_line() does a single
/// request/response exchange; transport failures (refused, timed out, peer
/// gone) throw IoError with a message that says which one it was.
class ClientSession {
 public:
  ClientSession(const std::string& host, std::uint16_t port, int timeout_ms = 5000)
      : timeout_ms_(timeout_ms) {
    fd_ = detail::Fd(::socket(AF_INET, SOCK_STREAM, 0));
    if (!fd_.valid()) throw IoError("ClientSession: socket() failed");

    sockaddr_in addr = detail::make_sockaddr(host, port);
    const int flags = ::fcntl(fd_.get(), F_GETFL, 0);
    ::fcntl(fd_.get(), F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(fd_.get(), reinterpret_cast<sockaddr*>(&addr), sizeof addr);
    if (rc != 0 && errno != EINPROGRESS) throw_connect_error(host, port);
    if (rc != 0) {
      pollfd pf{fd_.get(), POLLOUT, 0};
      const int pr = ::poll(&pf, 1, timeout_ms_);
      if (pr == 0)
        throw IoError("connection to " + host + ":" + std::to_string(port) + " timed out");
      if (pr < 0) throw IoError(std::string("ClientSession: poll failed: ") + std::strerror(errno));
      int err = 0;
      socklen_t len = sizeof err;
      ::getsockopt(fd_.get(), SOL_SOCKET, SO_ERROR, &err, &len);
      if (err != 0) {
        errno = err;
        throw_connect_error(host, port);
      }
    }
    ::fcntl(fd_.get(), F_SETFL, flags);
    const int one = 1;
    ::setsockopt(fd_.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  }

  /// Sends one command line, returns the reply line (without the newline).
  std::string send_line(std::string_view command) {
    std::string wire(command);
    wire += '\n';
    if (!detail::send_all(fd_.get(), wire)) throw IoError("send failed: " + err_text());

    std::size_t nl;
    while ((nl = buf_.find('\n')) == std::string::npos) {
      pollfd pf{fd_.get(), POLLIN, 0};
      const int pr = ::poll(&pf, 1, timeout_ms_);
      if (pr == 0) throw IoError("timed out waiting for a response");
      if (pr < 0) throw IoError("poll failed: " + err_text());
      char chunk[4096];
      const ssize_t n = ::recv(fd_.get(), chunk, sizeof chunk, 0);
      if (n == 0) throw IoError("server closed the connection before replying");
      if (n < 0) {
        if (errno == EINTR) continue;
        throw IoError("recv failed: " + err_text());
      }
      buf_.append(chunk, static_cast<std::size_t>(n));
    }
    std::string line = buf_.substr(0, nl);
    buf_.erase(0, nl + 1);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }

  void close() { fd_.reset(); }

 private:
  [[noreturn]] static void throw_connect_error(const std::string& host, std::uint16_t port) {
    const std::string target = host + ":" + std::to_string(port);
    if (errno == ECONNREFUSED) throw IoError("connection to " + target + " refused");
    if (errno == ETIMEDOUT) throw IoError("connection to " + target + " timed out");
    throw IoError("cannot connect to " + target + ": " + std::strerror(errno));
  }

  static std::string err_text() { return std::strerror(errno); }

  detail::Fd fd_;
  std::string buf_;
  int timeout_ms_;
};

/// One-shot exchange: connect, send a single command, return the reply line.
inline std::string client_send(const std::string& host, std::uint16_t port,
                               std::string_view command, int timeout_ms = 5000) {
  ClientSession session(host, port, timeout_ms);
  return session.send_line(command);
}

}  // namespace intlab

#endif
