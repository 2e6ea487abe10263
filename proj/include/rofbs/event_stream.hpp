#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>

#include "rofbs/types.hpp"

namespace rofbs {

// Bounded MPSC queue. push() blocks on a full queue; try_push() drops
// instead (the caller counts the drop). close() wakes everyone; a closed
// queue still drains.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

  bool push(T value) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return items_.size() < capacity_ || closed_; });
    if (closed_) return false;
    items_.push_back(std::move(value));
    not_empty_.notify_one();
    return true;
  }

  bool try_push(T value) {
    std::lock_guard lock(mu_);
    if (closed_ || items_.size() >= capacity_) return false;
    items_.push_back(std::move(value));
    not_empty_.notify_one();
    return true;
  }

  enum class PopResult { item, timeout, closed };

  PopResult pop_until(std::uint64_t deadline_ns, T& out) {
    std::unique_lock lock(mu_);
    auto deadline = std::chrono::steady_clock::time_point(
        std::chrono::nanoseconds(deadline_ns));
    while (items_.empty()) {
      if (closed_) return PopResult::closed;
      if (not_empty_.wait_until(lock, deadline) == std::cv_status::timeout &&
          items_.empty()) {
        return closed_ ? PopResult::closed : PopResult::timeout;
      }
    }
    out = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return PopResult::item;
  }

  std::optional<T> pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) return std::nullopt;
    T out = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return out;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return items_.size();
  }

 private:
  mutable std::mutex mu_;
  std::condition_variable not_empty_, not_full_;
  std::deque<T> items_;
  std::size_t capacity_;
  bool closed_ = false;
};

struct StreamStats {
  std::atomic<std::uint64_t> drops{0};           // queue-full / probe overruns
  std::atomic<std::uint64_t> clock_skew{0};      // non-monotonic timestamps
  std::atomic<std::uint64_t> fragment_drops{0};  // stale partial batches
};

// Single-consumer view of a running event source. Owns the producer thread;
// destruction or stop() shuts the producer down and closes the queue.
class EventStream {
 public:
  using Queue = BoundedQueue<FileOpenEvent>;
  enum class Poll { item, timeout, closed };

  EventStream(std::size_t capacity)
      : queue_(std::make_shared<Queue>(capacity)),
        stats_(std::make_shared<StreamStats>()) {}

  ~EventStream() { stop(); }

  std::optional<FileOpenEvent> next() { return queue_->pop(); }

  Poll poll_until(std::uint64_t deadline_ns, FileOpenEvent& out) {
    switch (queue_->pop_until(deadline_ns, out)) {
      case Queue::PopResult::item: return Poll::item;
      case Queue::PopResult::timeout: return Poll::timeout;
      case Queue::PopResult::closed: return Poll::closed;
    }
    return Poll::closed;
  }

  void stop() {
    stopping_.store(true);
    queue_->close();
    if (producer_.joinable()) producer_.join();
  }

  const StreamStats& stats() const { return *stats_; }

  // Source implementation hooks.
  std::shared_ptr<Queue> queue() { return queue_; }
  std::shared_ptr<StreamStats> shared_stats() { return stats_; }
  bool stopping() const { return stopping_.load(); }
  void set_producer(std::thread t) { producer_ = std::move(t); }

 private:
  std::shared_ptr<Queue> queue_;
  std::shared_ptr<StreamStats> stats_;
  std::atomic<bool> stopping_{false};
  std::thread producer_;
};

}  // namespace rofbs
