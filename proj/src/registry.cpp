#include "rofbs/registry.hpp"

#include <filesystem>

#include <json.hpp>

#include "rofbs/clock.hpp"
#include "rofbs/errors.hpp"

namespace rofbs {

using ordered_json = nlohmann::ordered_json;

const char* to_string(BackupStatus status) {
  switch (status) {
    case BackupStatus::created: return "create";
    case BackupStatus::restored: return "restore";
    case BackupStatus::finalized: return "finalize";
  }
  return "?";
}

void BackupRegistry::open_journal(const std::string& path) {
  std::lock_guard lock(mu_);
  if (std::filesystem::exists(path)) {
    std::ifstream in(path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(line_no, std::string("journal: ") + e.what());
      }
      const std::string op = j.value("op", "");
      const std::string original = j.value("original_path", "");
      if (op == "create") {
        BackupRecord rec;
        rec.original_path = original;
        rec.backup_path = j.value("backup_path", original + ".tmp");
        rec.content_hash = j.value("digest", "");
        rec.size = j.value("size", std::uint64_t{0});
        rec.created_at = j.value("ts_ns", std::uint64_t{0});
        entries_[original] = std::move(rec);
      } else if (op == "restore" || op == "finalize") {
        auto it = entries_.find(original);
        if (it != entries_.end() && it->second) {
          it->second->status = op == "restore" ? BackupStatus::restored
                                               : BackupStatus::finalized;
        }
      }
    }
  }
  journal_.open(path, std::ios::app);
}

void BackupRegistry::journal_line(const std::string& op,
                                  const BackupRecord& rec) {
  if (!journal_.is_open()) return;
  ordered_json j;
  j["op"] = op;
  j["original_path"] = rec.original_path;
  j["backup_path"] = rec.backup_path;
  j["digest"] = rec.content_hash;
  j["size"] = rec.size;
  j["ts_ns"] = rec.created_at;
  journal_ << j.dump() << '\n';
  journal_.flush();
}

bool BackupRegistry::reserve(const std::string& original_path) {
  std::lock_guard lock(mu_);
  auto [it, inserted] = entries_.try_emplace(original_path, std::nullopt);
  return inserted;
}

void BackupRegistry::commit(BackupRecord record) {
  std::lock_guard lock(mu_);
  journal_line("create", record);
  entries_[record.original_path] = std::move(record);
}

void BackupRegistry::abort(const std::string& original_path) {
  std::lock_guard lock(mu_);
  auto it = entries_.find(original_path);
  if (it != entries_.end() && !it->second) entries_.erase(it);
  ++drops_;
}

bool BackupRegistry::contains(const std::string& original_path) const {
  std::lock_guard lock(mu_);
  return entries_.count(original_path) != 0;
}

std::optional<BackupRecord> BackupRegistry::find(
    const std::string& original_path) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(original_path);
  if (it == entries_.end() || !it->second) return std::nullopt;
  return it->second;
}

bool BackupRegistry::mark(const std::string& original_path,
                          BackupStatus status) {
  std::lock_guard lock(mu_);
  auto it = entries_.find(original_path);
  if (it == entries_.end() || !it->second) return false;
  it->second->status = status;
  journal_line(to_string(status), *it->second);
  return true;
}

std::vector<BackupRecord> BackupRegistry::snapshot() const {
  std::lock_guard lock(mu_);
  std::vector<BackupRecord> out;
  out.reserve(entries_.size());
  for (const auto& [path, rec] : entries_) {
    if (rec) out.push_back(*rec);
  }
  return out;  // map iteration order is already sorted by path
}

std::size_t BackupRegistry::size() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& [path, rec] : entries_) n += rec.has_value() ? 1 : 0;
  return n;
}

std::uint64_t BackupRegistry::drop_count() const {
  std::lock_guard lock(mu_);
  return drops_;
}

void BackupRegistry::count_drop() {
  std::lock_guard lock(mu_);
  ++drops_;
}

}  // namespace rofbs
