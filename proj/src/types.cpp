#include "rofbs/types.hpp"

#include <algorithm>
#include <filesystem>
#include <stdexcept>

namespace rofbs {

namespace fs = std::filesystem;

const char* to_string(SourceKind kind) {
  switch (kind) {
    case SourceKind::kernel_probe: return "kernel_probe";
    case SourceKind::fs_notify: return "fs_notify";
    case SourceKind::trace_replay: return "trace_replay";
  }
  return "unknown";
}

SourceKind source_kind_from_string(const std::string& name) {
  if (name == "kernel_probe") return SourceKind::kernel_probe;
  if (name == "fs_notify") return SourceKind::fs_notify;
  if (name == "trace_replay") return SourceKind::trace_replay;
  throw std::invalid_argument("unknown source kind: " + name);
}

namespace {

std::string normalize_dir(const std::string& dir) {
  fs::path p = fs::path(dir).lexically_normal();
  if (!p.is_absolute()) {
    throw std::invalid_argument("protected directory must be absolute: " + dir);
  }
  std::string s = p.string();
  while (s.size() > 1 && s.back() == '/') s.pop_back();
  return s;
}

bool is_under(const std::string& path, const std::string& dir) {
  if (dir == "/") return !path.empty() && path.front() == '/';
  if (path.size() < dir.size()) return false;
  if (path.compare(0, dir.size(), dir) != 0) return false;
  return path.size() == dir.size() || path[dir.size()] == '/';
}

}  // namespace

ProtectedScope::ProtectedScope(std::vector<std::string> directories) {
  std::vector<std::string> normalized;
  normalized.reserve(directories.size());
  for (const auto& d : directories) normalized.push_back(normalize_dir(d));
  std::sort(normalized.begin(), normalized.end());
  normalized.erase(std::unique(normalized.begin(), normalized.end()),
                   normalized.end());
  // Drop entries nested under an earlier (shorter) one.
  for (const auto& d : normalized) {
    bool nested = std::any_of(dirs_.begin(), dirs_.end(),
                              [&](const auto& kept) { return is_under(d, kept); });
    if (!nested) dirs_.push_back(d);
  }
}

bool ProtectedScope::contains(const std::string& path) const {
  return std::any_of(dirs_.begin(), dirs_.end(),
                     [&](const auto& d) { return is_under(path, d); });
}

}  // namespace rofbs
