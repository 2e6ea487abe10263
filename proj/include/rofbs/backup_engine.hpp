#pragma once

#include <atomic>
#include <cstdint>
#include <string>

#include "rofbs/process_control.hpp"
#include "rofbs/registry.hpp"
#include "rofbs/types.hpp"

namespace rofbs {

enum class GuardAction {
  backed_up,
  already_backed_up,
  out_of_scope,
  process_vanished,
  copy_failed,
  skipped_too_large,
};

const char* to_string(GuardAction action);

struct GuardOutcome {
  GuardAction action = GuardAction::copy_failed;
  std::uint64_t suspend_duration_ns = 0;  // 0 only when no suspend attempted
  bool signal_denied = false;     // suspend refused; backup ran unsuspended
  bool suspend_timed_out = false; // opener force-resumed mid-copy
};

enum class RestoreStatus {
  restored,
  not_malicious,   // guard flag false, filesystem untouched
  backup_missing,  // .tmp deleted or encrypted away
  rename_failed,
  not_registered,
};

struct RestoreOutcome {
  RestoreStatus status = RestoreStatus::not_registered;
};

struct RestoreSummary {
  std::size_t restored = 0;
  std::size_t backup_missing = 0;
  std::size_t failed = 0;
  std::uint64_t first_restore_ns = 0;  // monotonic, 0 when nothing restored
};

enum class ShutdownPolicy { remove_backups, restore_missing_originals, keep_backups };

ShutdownPolicy shutdown_policy_from_string(const std::string& name);
const char* to_string(ShutdownPolicy policy);

struct FinalizeSummary {
  std::size_t removed = 0;
  std::size_t renamed = 0;
  std::size_t failed = 0;
};

struct BackupConfig {
  std::string suffix = ".tmp";
  std::uint64_t size_cap_bytes = 1ull << 30;        // larger files are skipped
  std::uint64_t suspend_timeout_ns = 500'000'000ull;  // force-resume budget
  std::uint64_t injected_copy_delay_ns = 0;  // test hook: slow copies down
  bool suspend_enabled = true;
};

// Snapshot-on-open engine. All public operations are safe to call from
// multiple threads; idempotency per path is enforced by the registry's
// atomic check-and-insert.
class BackupEngine {
 public:
  BackupEngine(BackupRegistry& registry, ProtectedScope scope,
               BackupConfig config = {});

  // Suspend the opener, snapshot the file, resume the opener.
  GuardOutcome guard_open(const FileOpenEvent& event);

  // Snapshot without process control. Copies to <path><suffix>.partial and
  // renames, so the backup name only ever denotes a complete snapshot.
  GuardOutcome create_backup_file(const std::string& file_path);

  RestoreOutcome restore_if_malicious_and_terminated(const std::string& file_path,
                                                     bool is_malicious);
  RestoreSummary restore_all(const Verdict& verdict);
  FinalizeSummary finalize_shutdown(ShutdownPolicy policy);

  const ProtectedScope& scope() const { return scope_; }
  const BackupConfig& config() const { return config_; }
  std::uint64_t backups_made() const { return backups_made_; }

 private:
  struct CopyResult;
  GuardOutcome snapshot_locked(const std::string& file_path,
                               std::uint64_t resume_deadline_ns,
                               pid_t suspended_pid, bool* timed_out);

  BackupRegistry& registry_;
  ProtectedScope scope_;
  BackupConfig config_;
  PidSuspender suspender_;
  std::atomic<std::uint64_t> backups_made_{0};
};

}  // namespace rofbs
