#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <sys/types.h>
#include <vector>

namespace rofbs {

// Liveness via /proc: zombies count as terminated (the parent has not
// reaped yet but the process can no longer run).
bool process_alive(pid_t pid);

// All live descendants of pid, breadth-first over /proc ppids.
std::vector<pid_t> descendants(pid_t pid);

// Confirmed-dead check: absent (or zombie) for `checks` consecutive polls.
bool confirm_terminated(pid_t pid, int checks = 3,
                        std::uint64_t interval_ns = 10'000'000ull);

// Refcounted SIGSTOP/SIGCONT. Concurrent guards on one pid keep it stopped
// until the last one resumes; delivery is serialized per suspender.
class PidSuspender {
 public:
  enum class SuspendResult { suspended, denied, vanished };

  SuspendResult suspend(pid_t pid);
  void resume(pid_t pid);

 private:
  std::mutex mu_;
  std::map<pid_t, int> counts_;
};

struct KillResult {
  std::uint64_t killed_at = 0;  // monotonic ns, all targets confirmed dead
  std::size_t terminated = 0;   // exited within the SIGTERM grace window
  std::size_t forced = 0;       // needed SIGKILL
  std::size_t already_exited = 0;
  std::size_t denied = 0;  // EPERM
  bool ok() const { return denied == 0; }
  std::size_t tree_size() const {
    return terminated + forced + already_exited + denied;
  }
};

// Terminates pid and all its descendants: SIGTERM, a grace period, then
// SIGKILL for survivors. Blocks until every target is confirmed dead or
// the overall deadline passes.
KillResult kill_process_tree(pid_t pid,
                             std::uint64_t grace_ns = 100'000'000ull,
                             std::uint64_t deadline_ns = 2'000'000'000ull);

}  // namespace rofbs
