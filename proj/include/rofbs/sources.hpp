#pragma once

#include <cstddef>
#include <memory>
#include <string>

#include "rofbs/event_stream.hpp"
#include "rofbs/types.hpp"

namespace rofbs {

struct SubscribeOptions {
  std::string backup_suffix = ".tmp";  // self-exclusion suffix
  std::size_t queue_capacity = 8192;
  // Kernel symbol to probe. The filesystem-agnostic open path is the
  // default; an xfs-specific hook can be configured instead.
  std::string kprobe_symbol = "do_sys_openat2";
  bool exclude_self = true;  // drop events caused by this process
  std::string trace_path;   // for SourceKind::trace_replay
};

// Starts an event source of the requested kind, filtered to the scope.
// Throws ProbeAttachFailed (kernel_probe) or SourceUnavailable; callers may
// fall back to fs_notify on ProbeAttachFailed.
std::unique_ptr<EventStream> subscribe(const ProtectedScope& scope,
                                       SourceKind kind,
                                       const SubscribeOptions& options = {});

// Deterministic replay of a recorded trace (regular file or FIFO). Events
// are yielded in file order with recorded timestamps; non-monotonic
// timestamps raise the stream's clock_skew counter, order is preserved.
std::unique_ptr<EventStream> replay_trace(const std::string& trace_path,
                                          std::size_t queue_capacity = 8192);

}  // namespace rofbs
