#include "rofbs/backup_engine.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <filesystem>
#include <thread>
#include <vector>

#include "rofbs/clock.hpp"
#include "rofbs/digest.hpp"
#include "rofbs/errors.hpp"

namespace rofbs {

namespace fs = std::filesystem;

const char* to_string(GuardAction action) {
  switch (action) {
    case GuardAction::backed_up: return "backed_up";
    case GuardAction::already_backed_up: return "already_backed_up";
    case GuardAction::out_of_scope: return "out_of_scope";
    case GuardAction::process_vanished: return "process_vanished";
    case GuardAction::copy_failed: return "copy_failed";
    case GuardAction::skipped_too_large: return "skipped_too_large";
  }
  return "?";
}

const char* to_string(ShutdownPolicy policy) {
  switch (policy) {
    case ShutdownPolicy::remove_backups: return "remove_backups";
    case ShutdownPolicy::restore_missing_originals:
      return "restore_missing_originals";
    case ShutdownPolicy::keep_backups: return "keep_backups";
  }
  return "?";
}

ShutdownPolicy shutdown_policy_from_string(const std::string& name) {
  if (name == "remove_backups") return ShutdownPolicy::remove_backups;
  if (name == "restore_missing_originals")
    return ShutdownPolicy::restore_missing_originals;
  if (name == "keep_backups") return ShutdownPolicy::keep_backups;
  throw std::invalid_argument("unknown shutdown policy: " + name);
}

BackupEngine::BackupEngine(BackupRegistry& registry, ProtectedScope scope,
                           BackupConfig config)
    : registry_(registry), scope_(std::move(scope)), config_(std::move(config)) {}

// Copies file_path to file_path + suffix via a .partial staging name,
// hashing as it goes. Checks the resume deadline between chunks: if the
// copy outlives the suspend budget the opener is resumed and the copy
// finishes unsuspended (flagged).
GuardOutcome BackupEngine::snapshot_locked(const std::string& file_path,
                                           std::uint64_t resume_deadline_ns,
                                           pid_t suspended_pid,
                                           bool* timed_out) {
  GuardOutcome out;
  struct stat st{};
  if (::stat(file_path.c_str(), &st) != 0) {
    registry_.abort(file_path);
    out.action = GuardAction::copy_failed;
    return out;
  }
  if (!S_ISREG(st.st_mode)) {
    registry_.abort(file_path);
    throw NotARegularFile(file_path);
  }
  if (static_cast<std::uint64_t>(st.st_size) > config_.size_cap_bytes) {
    registry_.abort(file_path);
    out.action = GuardAction::skipped_too_large;
    return out;
  }

  const std::string backup_path = file_path + config_.suffix;
  const std::string partial_path = backup_path + ".partial";

  int src = ::open(file_path.c_str(), O_RDONLY | O_CLOEXEC);
  if (src < 0) {
    registry_.abort(file_path);
    out.action = GuardAction::copy_failed;
    return out;
  }
  int dst = ::open(partial_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC,
                   st.st_mode & 0777);
  if (dst < 0) {
    ::close(src);
    registry_.abort(file_path);
    out.action = GuardAction::copy_failed;
    return out;
  }

  auto check_deadline = [&] {
    if (suspended_pid > 0 && resume_deadline_ns && now_ns() > resume_deadline_ns) {
      suspender_.resume(suspended_pid);
      suspended_pid = 0;
      if (timed_out) *timed_out = true;
    }
  };

  if (config_.injected_copy_delay_ns) {
    const std::uint64_t delay_end = now_ns() + config_.injected_copy_delay_ns;
    while (now_ns() < delay_end) {
      check_deadline();
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
  }

  Sha256 hash;
  std::uint64_t total = 0;
  std::vector<char> buf(256 * 1024);
  bool failed = false;
  for (;;) {
    ssize_t n = ::read(src, buf.data(), buf.size());
    if (n == 0) break;
    if (n < 0) {
      if (errno == EINTR) continue;
      failed = true;
      break;
    }
    hash.update(buf.data(), static_cast<std::size_t>(n));
    ssize_t off = 0;
    while (off < n) {
      ssize_t w = ::write(dst, buf.data() + off, static_cast<std::size_t>(n - off));
      if (w < 0) {
        if (errno == EINTR) continue;
        failed = true;
        break;
      }
      off += w;
    }
    if (failed) break;
    total += static_cast<std::uint64_t>(n);
    check_deadline();
  }
  ::close(src);
  ::close(dst);

  if (failed || ::rename(partial_path.c_str(), backup_path.c_str()) != 0) {
    ::unlink(partial_path.c_str());
    registry_.abort(file_path);
    out.action = GuardAction::copy_failed;
    return out;
  }

  BackupRecord rec;
  rec.original_path = file_path;
  rec.backup_path = backup_path;
  rec.content_hash = hash.finish_hex();
  rec.size = total;
  rec.created_at = now_ns();
  registry_.commit(std::move(rec));
  backups_made_.fetch_add(1);
  out.action = GuardAction::backed_up;
  return out;
}

GuardOutcome BackupEngine::create_backup_file(const std::string& file_path) {
  GuardOutcome out;
  if (!scope_.contains(file_path)) {
    out.action = GuardAction::out_of_scope;
    return out;
  }
  if (!registry_.reserve(file_path)) {
    out.action = GuardAction::already_backed_up;
    return out;
  }
  return snapshot_locked(file_path, 0, 0, nullptr);
}

GuardOutcome BackupEngine::guard_open(const FileOpenEvent& event) {
  GuardOutcome out;
  if (!scope_.contains(event.path)) {
    out.action = GuardAction::out_of_scope;
    return out;
  }
  // Registry short-circuit precedes signaling: repeat opens cost nothing.
  if (!registry_.reserve(event.path)) {
    out.action = GuardAction::already_backed_up;
    return out;
  }

  pid_t suspended_pid = 0;
  std::uint64_t suspend_start = 0;
  const bool self_event = event.pid == ::getpid();
  if (config_.suspend_enabled && event.pid > 0 && !self_event) {
    switch (suspender_.suspend(event.pid)) {
      case PidSuspender::SuspendResult::suspended:
        suspended_pid = event.pid;
        suspend_start = now_ns();
        break;
      case PidSuspender::SuspendResult::denied:
        out.signal_denied = true;  // backup proceeds unsuspended
        break;
      case PidSuspender::SuspendResult::vanished:
        break;  // opener already gone; still try to snapshot
    }
  }

  bool timed_out = false;
  const std::uint64_t deadline =
      suspended_pid ? now_ns() + config_.suspend_timeout_ns : 0;
  GuardOutcome copy;
  try {
    copy = snapshot_locked(event.path, deadline, suspended_pid, &timed_out);
  } catch (...) {
    if (suspended_pid && !timed_out) suspender_.resume(suspended_pid);
    throw;
  }
  if (suspended_pid && !timed_out) suspender_.resume(suspended_pid);

  out.action = copy.action;
  out.suspend_timed_out = timed_out;
  if (suspend_start) out.suspend_duration_ns = now_ns() - suspend_start;
  if (out.action == GuardAction::copy_failed && !process_alive(event.pid)) {
    out.action = GuardAction::process_vanished;
  }
  return out;
}

RestoreOutcome BackupEngine::restore_if_malicious_and_terminated(
    const std::string& file_path, bool is_malicious) {
  RestoreOutcome out;
  auto rec = registry_.find(file_path);
  if (!rec) {
    out.status = RestoreStatus::not_registered;
    return out;
  }
  if (!is_malicious) {
    out.status = RestoreStatus::not_malicious;
    return out;
  }
  // rename() atomically replaces whatever encrypted remnant occupies the
  // original name.
  if (::rename(rec->backup_path.c_str(), file_path.c_str()) != 0) {
    out.status = errno == ENOENT ? RestoreStatus::backup_missing
                                 : RestoreStatus::rename_failed;
    return out;
  }
  registry_.mark(file_path, BackupStatus::restored);
  out.status = RestoreStatus::restored;
  return out;
}

RestoreSummary BackupEngine::restore_all(const Verdict& verdict) {
  RestoreSummary summary;
  if (verdict.label != VerdictLabel::malicious) return summary;
  for (const auto& rec : registry_.snapshot()) {
    if (rec.status != BackupStatus::created) continue;
    auto outcome =
        restore_if_malicious_and_terminated(rec.original_path, true);
    switch (outcome.status) {
      case RestoreStatus::restored:
        if (summary.first_restore_ns == 0) summary.first_restore_ns = now_ns();
        ++summary.restored;
        break;
      case RestoreStatus::backup_missing:
        ++summary.backup_missing;
        break;
      default:
        ++summary.failed;
        break;
    }
  }
  return summary;
}

FinalizeSummary BackupEngine::finalize_shutdown(ShutdownPolicy policy) {
  FinalizeSummary summary;
  if (policy == ShutdownPolicy::keep_backups) return summary;
  for (const auto& rec : registry_.snapshot()) {
    if (rec.status != BackupStatus::created) continue;
    std::error_code ec;
    if (policy == ShutdownPolicy::restore_missing_originals &&
        !fs::exists(rec.original_path, ec)) {
      if (::rename(rec.backup_path.c_str(), rec.original_path.c_str()) == 0) {
        ++summary.renamed;
        registry_.mark(rec.original_path, BackupStatus::finalized);
      } else {
        ++summary.failed;
      }
      continue;
    }
    if (::unlink(rec.backup_path.c_str()) == 0) {
      ++summary.removed;
      registry_.mark(rec.original_path, BackupStatus::finalized);
    } else if (errno == ENOENT) {
      ++summary.failed;  // backup already gone; reported, never masked
    } else {
      ++summary.failed;
    }
  }
  return summary;
}

}  // namespace rofbs
