#include "rofbs/event_socket.hpp"

#include <poll.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <cstring>
#include <stdexcept>

#include "rofbs/trace.hpp"

namespace rofbs {

EventSocketPublisher::EventSocketPublisher(const std::string& socket_path)
    : path_(socket_path) {
  listen_fd_ = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC | SOCK_NONBLOCK, 0);
  if (listen_fd_ < 0) throw std::runtime_error("socket: " + std::string(std::strerror(errno)));
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  if (path_.size() >= sizeof(addr.sun_path)) {
    ::close(listen_fd_);
    throw std::runtime_error("socket path too long: " + path_);
  }
  std::strncpy(addr.sun_path, path_.c_str(), sizeof(addr.sun_path) - 1);
  ::unlink(path_.c_str());
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 ||
      ::listen(listen_fd_, 8) < 0) {
    ::close(listen_fd_);
    throw std::runtime_error("bind/listen " + path_ + ": " +
                             std::string(std::strerror(errno)));
  }
  acceptor_ = std::thread(&EventSocketPublisher::accept_loop, this);
}

EventSocketPublisher::~EventSocketPublisher() {
  stopping_.store(true);
  if (acceptor_.joinable()) acceptor_.join();
  if (listen_fd_ >= 0) ::close(listen_fd_);
  std::lock_guard lock(mu_);
  for (int fd : clients_) ::close(fd);
  ::unlink(path_.c_str());
}

void EventSocketPublisher::accept_loop() {
  while (!stopping_.load()) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    if (::poll(&pfd, 1, 100) <= 0) continue;
    int client = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (client < 0) continue;
    std::lock_guard lock(mu_);
    clients_.push_back(client);
  }
}

void EventSocketPublisher::publish(const FileOpenEvent& event) {
  std::string line = serialize_event(event);
  line.push_back('\n');
  std::lock_guard lock(mu_);
  for (auto it = clients_.begin(); it != clients_.end();) {
    ssize_t n = ::send(*it, line.data(), line.size(), MSG_NOSIGNAL | MSG_DONTWAIT);
    if (n == static_cast<ssize_t>(line.size())) {
      ++it;
    } else {
      ::close(*it);
      it = clients_.erase(it);
    }
  }
}

}  // namespace rofbs
