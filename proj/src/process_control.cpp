#include "rofbs/process_control.hpp"

#include <dirent.h>
#include <signal.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <thread>

#include "rofbs/clock.hpp"

namespace rofbs {

namespace {

// Returns 0 when the process is gone or a zombie; otherwise its ppid.
// state_out receives the /proc stat state character when readable.
pid_t stat_process(pid_t pid, char* state_out) {
  std::ifstream f("/proc/" + std::to_string(pid) + "/stat");
  std::string line;
  if (!f || !std::getline(f, line)) return -1;
  auto close_paren = line.rfind(')');
  if (close_paren == std::string::npos) return -1;
  char state = 0;
  pid_t ppid = 0;
  if (std::sscanf(line.c_str() + close_paren + 1, " %c %d", &state, &ppid) != 2) {
    return -1;
  }
  if (state_out) *state_out = state;
  return ppid;
}

void sleep_ns(std::uint64_t ns) {
  std::this_thread::sleep_for(std::chrono::nanoseconds(ns));
}

}  // namespace

bool process_alive(pid_t pid) {
  if (pid <= 0) return false;
  char state = 0;
  if (stat_process(pid, &state) < 0) return false;
  return state != 'Z' && state != 'X';
}

std::vector<pid_t> descendants(pid_t pid) {
  // Single /proc scan building the ppid->children map, then BFS.
  std::map<pid_t, std::vector<pid_t>> children;
  if (DIR* proc = ::opendir("/proc")) {
    while (dirent* ent = ::readdir(proc)) {
      char* end = nullptr;
      long p = std::strtol(ent->d_name, &end, 10);
      if (end == ent->d_name || *end != '\0' || p <= 0) continue;
      char state = 0;
      pid_t ppid = stat_process(static_cast<pid_t>(p), &state);
      if (ppid > 0 && state != 'Z' && state != 'X') {
        children[ppid].push_back(static_cast<pid_t>(p));
      }
    }
    ::closedir(proc);
  }
  std::vector<pid_t> out;
  std::vector<pid_t> frontier{pid};
  while (!frontier.empty()) {
    pid_t cur = frontier.back();
    frontier.pop_back();
    auto it = children.find(cur);
    if (it == children.end()) continue;
    for (pid_t child : it->second) {
      out.push_back(child);
      frontier.push_back(child);
    }
  }
  return out;
}

bool confirm_terminated(pid_t pid, int checks, std::uint64_t interval_ns) {
  for (int i = 0; i < checks; ++i) {
    if (process_alive(pid)) return false;
    if (i + 1 < checks) sleep_ns(interval_ns);
  }
  return true;
}

PidSuspender::SuspendResult PidSuspender::suspend(pid_t pid) {
  std::lock_guard lock(mu_);
  int& count = counts_[pid];
  if (count == 0) {
    if (::kill(pid, SIGSTOP) != 0) {
      counts_.erase(pid);
      return errno == EPERM ? SuspendResult::denied : SuspendResult::vanished;
    }
  }
  ++count;
  return SuspendResult::suspended;
}

void PidSuspender::resume(pid_t pid) {
  std::lock_guard lock(mu_);
  auto it = counts_.find(pid);
  if (it == counts_.end()) return;
  if (--it->second <= 0) {
    counts_.erase(it);
    ::kill(pid, SIGCONT);
  }
}

KillResult kill_process_tree(pid_t pid, std::uint64_t grace_ns,
                             std::uint64_t deadline_ns) {
  KillResult result;
  // pid 0/-1 would signal our own process group; synthetic pids from trace
  // replay must never reach a real kill.
  if (pid <= 1) {
    result.denied = 1;
    result.killed_at = now_ns();
    return result;
  }
  std::vector<pid_t> targets = descendants(pid);
  targets.push_back(pid);

  std::vector<pid_t> live;
  for (pid_t t : targets) {
    if (!process_alive(t)) {
      ++result.already_exited;
      continue;
    }
    if (::kill(t, SIGTERM) != 0 && errno == EPERM) {
      ++result.denied;
      continue;
    }
    // A stopped process cannot handle SIGTERM; continue it so the signal
    // is delivered inside the grace window.
    ::kill(t, SIGCONT);
    live.push_back(t);
  }

  const std::uint64_t start = now_ns();
  const std::uint64_t grace_end = start + grace_ns;
  const std::uint64_t hard_end = start + deadline_ns;

  auto prune_dead = [&](std::size_t* counter) {
    std::erase_if(live, [&](pid_t t) {
      if (process_alive(t)) return false;
      ++*counter;
      return true;
    });
  };

  while (!live.empty() && now_ns() < grace_end) {
    prune_dead(&result.terminated);
    if (live.empty()) break;
    sleep_ns(2'000'000);
  }
  prune_dead(&result.terminated);

  if (!live.empty()) {
    for (pid_t t : live) ::kill(t, SIGKILL);
    while (!live.empty() && now_ns() < hard_end) {
      prune_dead(&result.forced);
      if (live.empty()) break;
      sleep_ns(2'000'000);
    }
    prune_dead(&result.forced);
    result.denied += live.size();  // unkillable within the deadline
  }

  result.killed_at = now_ns();
  return result;
}

}  // namespace rofbs
