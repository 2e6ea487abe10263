#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace rofbs {

enum class BackupStatus { created, restored, finalized };

const char* to_string(BackupStatus status);

// Per-path snapshot bookkeeping. backup_path is always original_path with
// the backup suffix appended.
struct BackupRecord {
  std::string original_path;
  std::string backup_path;
  std::string content_hash;  // SHA-256 hex of snapshot bytes
  std::uint64_t size = 0;
  std::uint64_t created_at = 0;  // monotonic ns
  BackupStatus status = BackupStatus::created;
};

// Thread-safe registry with atomic check-and-insert, so at most one backup
// is ever created per original path no matter how many concurrent guards
// race on it. Optionally journaled: an append-only line-delimited log
// replayed at startup.
class BackupRegistry {
 public:
  BackupRegistry() = default;

  // Enables journaling; replays any existing journal first.
  void open_journal(const std::string& path);

  // Atomically claims original_path. Returns false if already claimed
  // (reserved or committed).
  bool reserve(const std::string& original_path);
  void commit(BackupRecord record);
  // Releases a reservation after a failed copy and counts the drop.
  void abort(const std::string& original_path);

  bool contains(const std::string& original_path) const;
  std::optional<BackupRecord> find(const std::string& original_path) const;
  bool mark(const std::string& original_path, BackupStatus status);

  std::vector<BackupRecord> snapshot() const;  // sorted by original_path
  std::size_t size() const;
  std::uint64_t drop_count() const;
  void count_drop();

 private:
  void journal_line(const std::string& op, const BackupRecord& rec);

  mutable std::mutex mu_;
  std::map<std::string, std::optional<BackupRecord>> entries_;  // nullopt = reserved
  std::uint64_t drops_ = 0;
  std::ofstream journal_;
};

}  // namespace rofbs
