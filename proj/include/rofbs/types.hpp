#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rofbs {

enum class SourceKind { kernel_probe, fs_notify, trace_replay };

const char* to_string(SourceKind kind);
SourceKind source_kind_from_string(const std::string& name);

// One file-open occurrence, from a kernel probe, a filesystem notification,
// or a trace replay. Immutable after construction; safe to copy across
// threads.
struct FileOpenEvent {
  std::int32_t pid = 0;
  std::int32_t ppid = 0;
  std::string comm;             // short process name, truncated to 16 chars
  std::uint64_t timestamp = 0;  // monotonic ns
  std::string path;             // absolute
  SourceKind source = SourceKind::trace_replay;
};

// Ordered leaf-first path components awaiting reconstruction.
struct PathFragmentBatch {
  std::int32_t pid = 0;
  std::uint64_t seq = 0;
  std::vector<std::string> fragments;  // leaf first, root last
};

// Directory roots under guard. Normalized: every entry absolute, no entry
// nested under another.
class ProtectedScope {
 public:
  ProtectedScope() = default;
  explicit ProtectedScope(std::vector<std::string> directories);

  bool contains(const std::string& path) const;
  const std::vector<std::string>& directories() const { return dirs_; }
  bool empty() const { return dirs_.empty(); }

 private:
  std::vector<std::string> dirs_;
};

enum class VerdictLabel { benign, malicious };

// Classifier output for one process.
struct Verdict {
  std::int32_t pid = 0;
  VerdictLabel label = VerdictLabel::benign;
  double score = 0.0;           // label == malicious iff score >= threshold
  std::uint64_t decided_at = 0; // monotonic ns
};

}  // namespace rofbs
