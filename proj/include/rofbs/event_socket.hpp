#pragma once

#include <atomic>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "rofbs/types.hpp"

namespace rofbs {

// UNIX stream socket publishing the fan-out event stream, one trace-format
// record per line, for split-process deployments. Best-effort: a client
// that stops reading is disconnected, never blocks the event path.
class EventSocketPublisher {
 public:
  explicit EventSocketPublisher(const std::string& socket_path);
  ~EventSocketPublisher();

  EventSocketPublisher(const EventSocketPublisher&) = delete;
  EventSocketPublisher& operator=(const EventSocketPublisher&) = delete;

  void publish(const FileOpenEvent& event);

 private:
  void accept_loop();

  std::string path_;
  int listen_fd_ = -1;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex mu_;
  std::vector<int> clients_;
};

}  // namespace rofbs
