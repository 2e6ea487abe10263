#include "rofbs/orchestrator.hpp"

#include <algorithm>
#include <thread>

#include "rofbs/clock.hpp"
#include "rofbs/errors.hpp"
#include "rofbs/event_socket.hpp"
#include "rofbs/process_control.hpp"

namespace rofbs {

RunMode run_mode_from_string(const std::string& name) {
  if (name == "rofbs_sync" || name == "sync") return RunMode::rofbs_sync;
  if (name == "rofbs_alpha_async" || name == "async")
    return RunMode::rofbs_alpha_async;
  throw std::invalid_argument("unknown run mode: " + name);
}

const char* to_string(RunMode mode) {
  return mode == RunMode::rofbs_sync ? "rofbs_sync" : "rofbs_alpha_async";
}

Orchestrator::Orchestrator(RunConfig config, BackupRegistry& registry)
    : config_(std::move(config)), registry_(registry) {}

void Orchestrator::request_stop() {
  stop_requested_.store(true);
  std::lock_guard lock(stream_mu_);
  if (active_stream_) active_stream_->queue()->close();
}

namespace {

// Kill -> confirm termination -> restore. Restore is never attempted while
// the flagged process might still run: live ransomware would re-encrypt.
IncidentReport handle_verdict(const Verdict& verdict, const std::string& comm,
                              std::uint64_t activity_start, BackupEngine& engine,
                              std::vector<std::string>& errors) {
  IncidentReport inc;
  inc.pid = verdict.pid;
  inc.comm = comm;
  inc.score = verdict.score;
  inc.kill = kill_process_tree(verdict.pid);

  if (!inc.kill.ok() && inc.kill.terminated + inc.kill.forced == 0 &&
      process_alive(verdict.pid)) {
    inc.kill_failed = true;
    errors.push_back("critical: kill denied for pid " +
                     std::to_string(verdict.pid) + "; restore skipped");
    inc.timings = DetectionTimings{activity_start, verdict.decided_at,
                                   inc.kill.killed_at};
    return inc;
  }
  confirm_terminated(verdict.pid);
  inc.restore = engine.restore_all(verdict);
  inc.timings = make_detection_timings(activity_start, verdict.decided_at,
                                       inc.kill.killed_at);
  return inc;
}

std::vector<std::uint64_t> gaps_until(const std::vector<std::uint64_t>& times,
                                      std::uint64_t cutoff) {
  std::vector<std::uint64_t> gaps;
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (cutoff && times[i] > cutoff) break;
    gaps.push_back(times[i] - times[i - 1]);
  }
  return gaps;
}

}  // namespace

RunReport Orchestrator::run() {
  RunReport report;
  report.mode = config_.mode;
  const std::uint64_t wall_start = now_ns();

  if (!config_.journal_path.empty()) {
    registry_.open_journal(config_.journal_path);
  }
  auto classifier = config_.classifier;
  if (!classifier) {
    classifier = std::make_shared<HeuristicClassifier>(
        config_.detection.rate_threshold, config_.detection.extension_threshold,
        config_.detection.decision_threshold);
  }
  BackupEngine engine(registry_, config_.scope, config_.backup);
  SlidingWindowDetector detector(config_.detection, classifier);

  std::unique_ptr<EventSocketPublisher> socket;
  if (!config_.event_socket.empty()) {
    socket = std::make_unique<EventSocketPublisher>(config_.event_socket);
  }

  SubscribeOptions options;
  options.backup_suffix = config_.backup.suffix;
  options.queue_capacity = config_.queue_capacity;
  options.kprobe_symbol = config_.kprobe_symbol;
  options.trace_path = config_.trace_path;

  std::unique_ptr<EventStream> stream;
  try {
    stream = subscribe(config_.scope, config_.source_kind, options);
  } catch (const ProbeAttachFailed& e) {
    report.errors.push_back(std::string("kernel probe attach failed (") +
                            e.what() + "); falling back to fs_notify");
    stream = subscribe(config_.scope, SourceKind::fs_notify, options);
  }
  {
    std::lock_guard lock(stream_mu_);
    active_stream_ = stream.get();
  }
  if (config_.on_ready) config_.on_ready();

  const bool is_replay = config_.source_kind == SourceKind::trace_replay;
  std::uint64_t first_event_ts = 0, last_event_ts = 0;
  std::uint64_t first_verdict_at = 0;
  std::atomic<std::uint64_t> last_activity{now_ns()};
  std::atomic<bool> incident_seen{false};

  auto note_event = [&](const FileOpenEvent& ev) {
    ++report.events_seen;
    if (first_event_ts == 0) first_event_ts = ev.timestamp;
    last_event_ts = ev.timestamp;
    last_activity.store(now_ns());
    if (socket) socket->publish(ev);
  };

  if (config_.mode == RunMode::rofbs_sync) {
    // Conventional ROFBS: one loop, the backup fully precedes the feature
    // update for each event, so copies block detection by construction.
    FileOpenEvent ev;
    for (;;) {
      if (stop_requested_.load()) break;
      const std::uint64_t now = now_ns();
      std::uint64_t deadline =
          std::min(detector.next_tick_deadline(now), now + ms_to_ns(50));
      auto result = stream->poll_until(deadline, ev);
      if (result == EventStream::Poll::item) {
        note_event(ev);
        ++report.backup_consumer_events;
        engine.guard_open(ev);
        ++report.detect_consumer_events;
        detector.ingest(ev);
      }
      for (const auto& verdict : detector.tick(now_ns())) {
        auto start =
            detector.activity_start(verdict.pid).value_or(verdict.decided_at);
        report.incidents.push_back(handle_verdict(
            verdict, detector.comm_of(verdict.pid), start, engine,
            report.errors));
        if (first_verdict_at == 0) first_verdict_at = verdict.decided_at;
        incident_seen.store(true);
        if (config_.stop_after_incident) stop_requested_.store(true);
      }
      if (result == EventStream::Poll::closed) break;
      if (incident_seen.load() &&
          now_ns() - last_activity.load() > config_.quiescence_ns) {
        break;
      }
    }
  } else {
    // ROFBSalpha: independent consumers on separate queues; guard and
    // detection never share a lock on the event path.
    BoundedQueue<FileOpenEvent> backup_q(config_.queue_capacity);
    BoundedQueue<FileOpenEvent> detect_q(config_.queue_capacity);
    std::atomic<std::uint64_t> backup_count{0};

    std::thread fanout([&] {
      while (auto ev = stream->next()) {
        note_event(*ev);
        detect_q.push(*ev);
        backup_q.push(std::move(*ev));
      }
      backup_q.close();
      detect_q.close();
    });

    std::vector<std::thread> backup_workers;
    const std::size_t workers = std::max<std::size_t>(1, config_.backup_workers);
    for (std::size_t i = 0; i < workers; ++i) {
      backup_workers.emplace_back([&] {
        while (auto ev = backup_q.pop()) {
          backup_count.fetch_add(1);
          engine.guard_open(*ev);
        }
      });
    }

    std::thread detect([&] {
      FileOpenEvent ev;
      for (;;) {
        const std::uint64_t now = now_ns();
        std::uint64_t deadline =
            std::min(detector.next_tick_deadline(now), now + ms_to_ns(50));
        auto result = detect_q.pop_until(deadline, ev);
        if (result == BoundedQueue<FileOpenEvent>::PopResult::item) {
          ++report.detect_consumer_events;
          detector.ingest(ev);
        }
        for (const auto& verdict : detector.tick(now_ns())) {
          auto start =
              detector.activity_start(verdict.pid).value_or(verdict.decided_at);
          report.incidents.push_back(handle_verdict(
              verdict, detector.comm_of(verdict.pid), start, engine,
              report.errors));
          if (first_verdict_at == 0) first_verdict_at = verdict.decided_at;
          incident_seen.store(true);
          if (config_.stop_after_incident) request_stop();
        }
        if (result == BoundedQueue<FileOpenEvent>::PopResult::closed) break;
        if (incident_seen.load() &&
            now_ns() - last_activity.load() > config_.quiescence_ns) {
          request_stop();
        }
      }
    });

    fanout.join();
    detect.join();
    for (auto& worker : backup_workers) worker.join();
    report.backup_consumer_events = backup_count.load();
  }

  {
    std::lock_guard lock(stream_mu_);
    active_stream_ = nullptr;
  }
  stream->stop();

  report.backups_made = engine.backups_made();
  report.drops = stream->stats().drops.load() + registry_.drop_count();
  report.finalize = engine.finalize_shutdown(config_.shutdown_policy);
  report.feature_update_gaps_ns =
      gaps_until(detector.update_times(), first_verdict_at);
  report.duration_ns = is_replay ? (last_event_ts - first_event_ts)
                                 : (now_ns() - wall_start);
  if (report.events_seen == 0) report.duration_ns = 0;
  return report;
}

}  // namespace rofbs
