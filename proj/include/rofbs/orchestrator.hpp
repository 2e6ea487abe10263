#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "rofbs/backup_engine.hpp"
#include "rofbs/detection.hpp"
#include "rofbs/registry.hpp"
#include "rofbs/sources.hpp"
#include "rofbs/types.hpp"

namespace rofbs {

enum class RunMode { rofbs_sync, rofbs_alpha_async };

RunMode run_mode_from_string(const std::string& name);
const char* to_string(RunMode mode);

struct RunConfig {
  RunMode mode = RunMode::rofbs_alpha_async;
  ProtectedScope scope;
  SourceKind source_kind = SourceKind::fs_notify;
  std::string trace_path;  // for trace_replay
  std::shared_ptr<const Classifier> classifier;  // default heuristic when null
  DetectionConfig detection;
  BackupConfig backup;
  ShutdownPolicy shutdown_policy = ShutdownPolicy::remove_backups;
  std::size_t queue_capacity = 8192;
  std::size_t backup_workers = 4;  // async mode; sync is single-loop
  bool stop_after_incident = true;
  std::uint64_t quiescence_ns = 5'000'000'000ull;  // idle stop after incident
  std::string event_socket;  // fan-out socket path, empty = disabled
  std::string journal_path;  // registry journal, empty = in-memory only
  std::string kprobe_symbol = "do_sys_openat2";
  // Invoked once the event source is attached and consuming; experiment
  // runners launch the adversary only after this fires.
  std::function<void()> on_ready;
};

struct IncidentReport {
  std::int32_t pid = 0;
  std::string comm;
  double score = 0.0;
  DetectionTimings timings;
  RestoreSummary restore;
  KillResult kill;
  bool kill_failed = false;  // critical: restore was NOT attempted
};

struct RunReport {
  RunMode mode = RunMode::rofbs_alpha_async;
  std::uint64_t events_seen = 0;
  std::uint64_t backups_made = 0;
  std::uint64_t drops = 0;  // queue drops + failed/raced backups
  std::vector<IncidentReport> incidents;
  FinalizeSummary finalize;
  std::uint64_t duration_ns = 0;  // replay: last - first event timestamp
  // Gaps between consecutive feature-window recomputes, up to the first
  // verdict. The async/sync blocking contrast is read off these.
  std::vector<std::uint64_t> feature_update_gaps_ns;
  std::uint64_t backup_consumer_events = 0;  // fan-out completeness counters
  std::uint64_t detect_consumer_events = 0;
  std::vector<std::string> errors;
};

// Wires source -> {backup_engine, detection_pipeline} in one of the two
// architecture modes and drives kill -> confirm -> restore on a malicious
// verdict. run() blocks; request_stop() may be called from any thread.
class Orchestrator {
 public:
  Orchestrator(RunConfig config, BackupRegistry& registry);

  RunReport run();
  void request_stop();

 private:
  RunConfig config_;
  BackupRegistry& registry_;
  std::atomic<bool> stop_requested_{false};
  std::mutex stream_mu_;
  EventStream* active_stream_ = nullptr;  // guarded by stream_mu_
};

}  // namespace rofbs
