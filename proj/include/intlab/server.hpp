#ifndef INTLAB_SERVER_HPP
#define INTLAB_SERVER_HPP

#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <string>

#include "intlab/controller.hpp"
#include "intlab/errors.hpp"
#include "intlab/net.hpp"
#include "intlab/protocol.hpp"

namespace intlab {

/// Single-session TCP front end for a Controller. Takes newline-delimited
/// commands, writes one reply per line. A second connection while a session
/// is live gets an "ERR busy" banner and is closed. After a session ends the
/// server re-listens; if that session changed the network configuration, the
/// next listen re-binds to the stored address (same port).
class ControllerServer {
 public:
  struct Options {
    std::string listen_ip = "127.0.0.1";
    std::uint16_t port = 5025;
    std::size_t max_line_bytes = 65536;  ///< longer unterminated input ends the session
    bool quiet = true;                   ///< no stderr chatter when true
  };

  ControllerServer(Options opts, Controller& controller)
      : opts_(std::move(opts)), controller_(controller) {
    if (::pipe(wake_pipe_) != 0) throw IoError("ControllerServer: pipe() failed");
  }

  ~ControllerServer() {
    ::close(wake_pipe_[0]);
    ::close(wake_pipe_[1]);
  }

  /// Binds and starts listening; throws IoError when the address is taken.
  void bind() {
    listen_fd_ = open_listener(opts_.listen_ip, opts_.port);
    bound_ip_ = opts_.listen_ip;
    // port 0 means "pick one"; reflect the choice
    sockaddr_in addr{};
    socklen_t len = sizeof addr;
    if (::getsockname(listen_fd_.get(), reinterpret_cast<sockaddr*>(&addr), &len) == 0)
      bound_port_ = ntohs(addr.sin_port);
  }

  std::uint16_t port() const { return bound_port_; }
  const std::string& bound_ip() const { return bound_ip_; }

  /// Accept/serve until stop(). One session at a time; state persists across
  /// sessions through the controller's parameter store.
  void serve_forever() {
    if (!listen_fd_.valid()) bind();
    while (!stopping_.load(std::memory_order_acquire)) {
      pollfd fds[2] = {{listen_fd_.get(), POLLIN, 0}, {wake_pipe_[0], POLLIN, 0}};
      if (::poll(fds, 2, -1) < 0) {
        if (errno == EINTR) continue;
        throw IoError(std::string("ControllerServer: poll failed: ") + std::strerror(errno));
      }
      if (fds[1].revents) break;
      if (!(fds[0].revents & POLLIN)) continue;

      detail::Fd conn(::accept(listen_fd_.get(), nullptr, nullptr));
      if (!conn.valid()) continue;
      const bool net_changed = run_session(conn.get());
      conn.reset();
      if (net_changed) rebind_to_stored();
    }
  }

  /// Thread-safe; wakes the serve loop and makes serve_forever return.
  void stop() {
    stopping_.store(true, std::memory_order_release);
    const char b = 1;
    [[maybe_unused]] ssize_t n = ::write(wake_pipe_[1], &b, 1);
  }

 private:
  static detail::Fd open_listener(const std::string& ip, std::uint16_t port) {
    detail::Fd fd(::socket(AF_INET, SOCK_STREAM, 0));
    if (!fd.valid()) throw IoError("ControllerServer: socket() failed");
    const int one = 1;
    ::setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr = detail::make_sockaddr(ip, port);
    if (::bind(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
      throw IoError("ControllerServer: cannot bind " + ip + ":" + std::to_string(port) + ": " +
                    std::strerror(errno));
    if (::listen(fd.get(), 4) != 0)
      throw IoError(std::string("ControllerServer: listen failed: ") + std::strerror(errno));
    return fd;
  }

  /// Returns true when the session executed a NET command.
  bool run_session(int conn) {
    std::string buf;
    bool net_changed = false;
    char chunk[4096];

    for (;;) {
      pollfd fds[3] = {{conn, POLLIN, 0}, {listen_fd_.get(), POLLIN, 0}, {wake_pipe_[0], POLLIN, 0}};
      if (::poll(fds, 3, -1) < 0) {
        if (errno == EINTR) continue;
        return net_changed;
      }
      if (fds[2].revents) return net_changed;  // stop() during a session

      if (fds[1].revents & POLLIN) {
        // session slot is taken; turn the newcomer away
        detail::Fd extra(::accept(listen_fd_.get(), nullptr, nullptr));
        if (extra.valid())
          detail::send_all(extra.get(), std::string(Response::error(ErrCode::Busy).to_line()) + "\n");
        continue;
      }

      if (!(fds[0].revents & (POLLIN | POLLHUP | POLLERR))) continue;
      const ssize_t n = ::recv(conn, chunk, sizeof chunk, 0);
      if (n <= 0) return net_changed;  // peer closed or reset; state stays intact
      buf.append(chunk, static_cast<std::size_t>(n));

      std::size_t nl;
      while ((nl = buf.find('\n')) != std::string::npos) {
        const std::string line = buf.substr(0, nl);
        buf.erase(0, nl + 1);
        ExecResult res = controller_.handle_line(line);
        if (!detail::send_all(conn, res.response.to_line() + "\n")) return net_changed;
        net_changed = net_changed || res.net_changed;
        if (res.session_end) return net_changed;
      }
      if (buf.size() > opts_.max_line_bytes) {
        // unterminated garbage; refuse to buffer without bound
        detail::send_all(conn, std::string(Response::error(ErrCode::Unknown).to_line()) + "\n");
        return net_changed;
      }
    }
  }

  void rebind_to_stored() {
    const std::string ip = format_dotted_quad(controller_.state().net.ip);
    if (ip == bound_ip_) return;
    try {
      detail::Fd next = open_listener(ip, bound_port_);
      listen_fd_ = std::move(next);
      bound_ip_ = ip;
      if (!opts_.quiet)
        std::fprintf(stderr, "listening on %s:%u (stored network config)\n", ip.c_str(),
                     bound_port_);
    } catch (const IoError& e) {
      if (!opts_.quiet)
        std::fprintf(stderr, "keeping %s:%u; stored address unusable: %s\n", bound_ip_.c_str(),
                     bound_port_, e.what());
    }
  }

  Options opts_;
  Controller& controller_;
  detail::Fd listen_fd_;
  std::string bound_ip_;
  std::uint16_t bound_port_ = 0;
  int wake_pipe_[2] = {-1, -1};
  std::atomic<bool> stopping_{false};
};

}  // namespace intlab

#endif
