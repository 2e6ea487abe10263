#include "rofbs/metrics.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "rofbs/clock.hpp"
#include "rofbs/errors.hpp"
#include "rofbs/trace.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace rofbs {

BackupRatio backup_ratio(long long backup_files, long long encrypted_files) {
  if (backup_files < 0)
    throw NegativeCount("backup_files = " + std::to_string(backup_files));
  if (encrypted_files < 0)
    throw NegativeCount("encrypted_files = " + std::to_string(encrypted_files));
  if (encrypted_files == 0) return {100.0, true};
  // Exact integer rational in hundredths of a percent, rounded half-up,
  // so 23/117 lands on 19.66 instead of drifting through binary floats.
  const long long hundredths =
      (backup_files * 10000 + encrypted_files / 2) / encrypted_files;
  return {static_cast<double>(hundredths) / 100.0, false};
}

std::string format_percent(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", value);
  return buf;
}

namespace {

const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::emulator: return "emulator";
    case Scenario::benign: return "benign";
    case Scenario::replay: return "replay";
  }
  return "emulator";
}

// fork/exec the adversary so the daemon observes a genuinely separate
// process it is allowed to kill.
pid_t spawn(const std::vector<std::string>& argv) {
  std::vector<char*> raw;
  raw.reserve(argv.size() + 1);
  for (const auto& a : argv) raw.push_back(const_cast<char*>(a.c_str()));
  raw.push_back(nullptr);
  const pid_t pid = ::fork();
  if (pid == 0) {
    ::execv(raw[0], raw.data());
    std::perror("execv");
    ::_exit(127);
  }
  return pid;
}

// Waits for the child with a hard deadline; past it the child is killed so
// one wedged trial can't hang the whole experiment.
int reap(pid_t pid, std::uint64_t deadline_ns) {
  while (true) {
    int status = 0;
    const pid_t r = ::waitpid(pid, &status, WNOHANG);
    if (r == pid) return status;
    if (r < 0) return -1;
    if (now_ns() > deadline_ns) {
      ::kill(pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      return status;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

std::uint64_t emulation_key(const ExperimentConfig& config, int trial) {
  return (config.corpus_seed + 1) * 0x9E3779B97F4A7C15ull +
         static_cast<std::uint64_t>(trial) + 1;
}

ExperimentReport run_trial(const ExperimentConfig& config, int trial) {
  ExperimentReport report;
  report.mode = to_string(config.mode);
  report.trial = trial;
  report.scenario = to_string(config.scenario);

  const fs::path trial_dir =
      fs::path(config.workdir) / ("trial_" + std::to_string(trial));
  fs::create_directories(trial_dir);
  const fs::path corpus_root = trial_dir / "corpus";

  const CorpusManifest manifest = generate_victim_corpus(
      corpus_root.string(), config.corpus_files, config.corpus_seed + trial);

  EmulatorProfile profile = config.profile_name.empty()
                                ? config.profile_override
                                : profile_by_name(config.profile_name);

  RunConfig run;
  run.mode = config.mode;
  run.scope = ProtectedScope({corpus_root.string()});
  run.detection = config.detection;
  run.detection.protected_file_count = manifest.entries.size();
  run.backup = config.backup;
  run.backup_workers = config.backup_workers;
  run.shutdown_policy = config.shutdown_policy;
  run.journal_path = (trial_dir / "journal.jsonl").string();

  const fs::path trace_path = trial_dir / "replay.trace.jsonl";
  if (config.scenario == Scenario::replay) {
    // Synthetic opener: pid 0 carries no live process, so suspension and
    // process control are disabled and the run is a pure data-path replay.
    std::vector<FileOpenEvent> events;
    std::uint64_t ts = 1'000'000;
    for (std::size_t pass = 0; pass < config.replay_opens_per_file; ++pass) {
      for (const auto& entry : manifest.entries) {
        FileOpenEvent ev;
        ev.pid = 0;
        ev.ppid = 0;
        ev.comm = "replay";
        ev.timestamp = ts;
        ev.path = (corpus_root / entry.relative_path).string();
        ev.source = SourceKind::trace_replay;
        events.push_back(std::move(ev));
        ts += 1'000'000;
      }
    }
    save_trace(events, trace_path.string());
    run.source_kind = SourceKind::trace_replay;
    run.trace_path = trace_path.string();
    run.backup.suspend_enabled = false;
    // A replayed trace must render identically on every run, so the
    // classifier is parked out of reach: no kill timestamps leak in.
    run.detection.rate_threshold = 1e18;
    run.shutdown_policy = ShutdownPolicy::keep_backups;
  } else {
    run.source_kind = SourceKind::fs_notify;
  }

  std::promise<void> ready;
  auto ready_done = ready.get_future();
  run.on_ready = [&ready] { ready.set_value(); };

  BackupRegistry registry;
  Orchestrator orch(run, registry);
  RunReport run_report;
  auto daemon = std::async(std::launch::async,
                           [&orch, &run_report] { run_report = orch.run(); });

  if (ready_done.wait_for(std::chrono::seconds(10)) !=
      std::future_status::ready) {
    report.errors.push_back("event source never became ready");
    orch.request_stop();
    daemon.wait();
    return report;
  }

  if (config.scenario == Scenario::replay) {
    daemon.wait();  // replay runs to end-of-trace on its own
  } else {
    std::this_thread::sleep_for(
        std::chrono::nanoseconds(config.source_settle_ns));

    std::vector<std::string> argv;
    const fs::path log_path = trial_dir / "adversary.log.jsonl";
    std::uint64_t budget_ns = 0;
    if (config.scenario == Scenario::emulator) {
      const fs::path profile_path = trial_dir / "profile.json";
      save_profile(profile, profile_path.string());
      argv = {config.cli_binary,
              "emulate",
              "--manifest", manifest_path_for(corpus_root.string()),
              "--profile-file", profile_path.string(),
              "--log", log_path.string(),
              "--key", std::to_string(emulation_key(config, trial))};
      const double fps = std::max(profile.files_per_second, 1.0);
      budget_ns = s_to_ns(manifest.entries.size() / fps + 30.0);
    } else {
      argv = {config.cli_binary,
              "benign",
              "--manifest", manifest_path_for(corpus_root.string()),
              "--rate", std::to_string(config.benign_rate),
              "--duration-ns", std::to_string(config.benign_duration_ns),
              "--seed", std::to_string(config.corpus_seed + trial),
              "--log", log_path.string()};
      budget_ns = config.benign_duration_ns + s_to_ns(30.0);
    }

    const pid_t child = spawn(argv);
    if (child < 0) {
      report.errors.push_back("failed to fork adversary");
      orch.request_stop();
      daemon.wait();
      return report;
    }
    reap(child, now_ns() + budget_ns);

    // Drain grace: let queued events flow through before stopping.
    std::this_thread::sleep_for(std::chrono::milliseconds(1200));
    orch.request_stop();
    daemon.wait();
  }

  report.classifier_name =
      run.classifier ? run.classifier->name() : "heuristic";
  report.events_seen = run_report.events_seen;
  report.backup_files = run_report.backups_made;
  report.drops = run_report.drops;
  report.duration_ns = run_report.duration_ns;
  report.feature_update_gaps_ns = run_report.feature_update_gaps_ns;
  report.errors.insert(report.errors.end(), run_report.errors.begin(),
                       run_report.errors.end());
  if (!run_report.incidents.empty()) {
    const auto& inc = run_report.incidents.front();
    report.has_incident = true;
    report.response_time_ns = inc.timings.response_time_ns();
    report.kill_time_ns = inc.timings.kill_time_ns();
    report.detection_time_ns = inc.timings.detection_time_ns();
    report.killed_at_ns = inc.timings.killed_at;
    report.first_restore_ns = inc.restore.first_restore_ns;
    report.restored = inc.restore.restored;
    report.backup_missing = inc.restore.backup_missing;
  }
  report.malicious_verdicts = run_report.incidents.size();

  const auto encrypted =
      encrypted_entries(manifest, corpus_root.string(),
                        profile.ransom_extension);
  report.encrypted_files = encrypted.size();

  if (config.scenario == Scenario::emulator) {
    // Cross-check the corpus scan against what the emulator says it did.
    const fs::path log_path = trial_dir / "adversary.log.jsonl";
    std::error_code ec;
    if (fs::exists(log_path, ec)) {
      const EmulationLog log = load_emulation_log(log_path.string());
      std::size_t renamed = 0;
      for (const auto& e : log.entries)
        if (e.t_renamed_ns > 0) ++renamed;
      const std::size_t tolerance = profile.child_processes + 1;
      const std::size_t hi = std::max<std::size_t>(renamed, encrypted.size());
      const std::size_t lo = std::min<std::size_t>(renamed, encrypted.size());
      if (hi - lo > tolerance) {
        std::ostringstream msg;
        msg << "encrypted-count mismatch: scan=" << encrypted.size()
            << " log=" << renamed << " tolerance=" << tolerance;
        report.errors.push_back(msg.str());
      }
    }
  }

  // Protected fraction: of the files the adversary reached, how many have
  // a snapshot whose bytes match the pre-encryption manifest digest.
  if (report.encrypted_files == 0) {
    report.protected_fraction = 100.0;
  } else {
    std::size_t valid = 0;
    for (const auto& rel : encrypted) {
      const std::string original = (corpus_root / rel).string();
      const auto rec = registry.find(original);
      ManifestEntry key;
      key.relative_path = rel;
      const auto it = std::lower_bound(
          manifest.entries.begin(), manifest.entries.end(), key,
          [](const ManifestEntry& a, const ManifestEntry& b) {
            return a.relative_path < b.relative_path;
          });
      if (rec && it != manifest.entries.end() &&
          it->relative_path == rel && rec->content_hash == it->digest) {
        ++valid;
      }
    }
    report.protected_fraction =
        static_cast<double>(valid) / report.encrypted_files * 100.0;
  }

  const BackupRatio ratio = backup_ratio(
      static_cast<long long>(report.backup_files),
      static_cast<long long>(report.encrypted_files));
  report.backup_ratio_percent = ratio.percent;
  report.ratio_vacuous = ratio.fully_protected_vacuous;

  if (config.scenario == Scenario::replay) {
    // Everything left in the report must be a pure function of the trace.
    report.feature_update_gaps_ns.clear();
  }
  return report;
}

ordered_json report_to_json(const ExperimentReport& r) {
  ordered_json j;
  j["mode"] = r.mode;
  j["trial"] = r.trial;
  j["classifier"] = r.classifier_name;
  j["scenario"] = r.scenario;
  j["encrypted_files"] = r.encrypted_files;
  j["backup_files"] = r.backup_files;
  j["backup_ratio_percent"] = r.backup_ratio_percent;
  j["ratio_vacuous"] = r.ratio_vacuous;
  j["protected_fraction"] = r.protected_fraction;
  j["has_incident"] = r.has_incident;
  j["response_time_ns"] = r.response_time_ns;
  j["kill_time_ns"] = r.kill_time_ns;
  j["detection_time_ns"] = r.detection_time_ns;
  j["drops"] = r.drops;
  j["duration_ns"] = r.duration_ns;
  j["events_seen"] = r.events_seen;
  j["feature_update_gaps_ns"] = r.feature_update_gaps_ns;
  j["first_restore_ns"] = r.first_restore_ns;
  j["killed_at_ns"] = r.killed_at_ns;
  j["restored"] = r.restored;
  j["backup_missing"] = r.backup_missing;
  j["malicious_verdicts"] = r.malicious_verdicts;
  j["errors"] = r.errors;
  return j;
}

ExperimentReport report_from_json(const ordered_json& j) {
  ExperimentReport r;
  r.mode = j.at("mode").get<std::string>();
  r.trial = j.at("trial").get<int>();
  r.classifier_name = j.at("classifier").get<std::string>();
  r.scenario = j.at("scenario").get<std::string>();
  r.encrypted_files = j.at("encrypted_files").get<std::uint64_t>();
  r.backup_files = j.at("backup_files").get<std::uint64_t>();
  r.backup_ratio_percent = j.at("backup_ratio_percent").get<double>();
  r.ratio_vacuous = j.at("ratio_vacuous").get<bool>();
  r.protected_fraction = j.at("protected_fraction").get<double>();
  r.has_incident = j.at("has_incident").get<bool>();
  r.response_time_ns = j.at("response_time_ns").get<std::uint64_t>();
  r.kill_time_ns = j.at("kill_time_ns").get<std::uint64_t>();
  r.detection_time_ns = j.at("detection_time_ns").get<std::uint64_t>();
  r.drops = j.at("drops").get<std::uint64_t>();
  r.duration_ns = j.at("duration_ns").get<std::uint64_t>();
  r.events_seen = j.at("events_seen").get<std::uint64_t>();
  r.feature_update_gaps_ns =
      j.at("feature_update_gaps_ns").get<std::vector<std::uint64_t>>();
  r.first_restore_ns = j.at("first_restore_ns").get<std::uint64_t>();
  r.killed_at_ns = j.at("killed_at_ns").get<std::uint64_t>();
  r.restored = j.at("restored").get<std::size_t>();
  r.backup_missing = j.at("backup_missing").get<std::size_t>();
  r.malicious_verdicts = j.at("malicious_verdicts").get<std::size_t>();
  r.errors = j.at("errors").get<std::vector<std::string>>();
  return r;
}

std::string seconds_cell(std::uint64_t ns, bool present) {
  if (!present) return "-";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", static_cast<double>(ns) / 1e9);
  return buf;
}

}  // namespace

std::vector<ExperimentReport> run_experiment(const ExperimentConfig& config,
                                             int trials) {
  std::vector<ExperimentReport> reports;
  for (int trial = 0; trial < trials; ++trial) {
    try {
      reports.push_back(run_trial(config, trial));
    } catch (const std::exception& ex) {
      ExperimentReport failed;
      failed.mode = to_string(config.mode);
      failed.trial = trial;
      failed.scenario = to_string(config.scenario);
      failed.errors.push_back(std::string("trial failed: ") + ex.what());
      reports.push_back(std::move(failed));
    }
    if (!config.keep_workdir) {
      std::error_code ec;
      fs::remove_all(
          fs::path(config.workdir) / ("trial_" + std::to_string(trial)), ec);
    }
  }
  return reports;
}

void render_report(const std::vector<ExperimentReport>& reports,
                   std::ostream& table_out) {
  table_out << "trial  mode              scenario  classifier  E      B      "
               "ratio%    prot%   resp_s   kill_s   det_s    drops\n";
  for (const auto& r : reports) {
    char line[256];
    std::snprintf(line, sizeof(line),
                  "%-6d %-17s %-9s %-11s %-6llu %-6llu %-9s %-7s %-8s %-8s "
                  "%-8s %llu",
                  r.trial, r.mode.c_str(), r.scenario.c_str(),
                  r.classifier_name.c_str(),
                  static_cast<unsigned long long>(r.encrypted_files),
                  static_cast<unsigned long long>(r.backup_files),
                  format_percent(r.backup_ratio_percent).c_str(),
                  format_percent(r.protected_fraction).c_str(),
                  seconds_cell(r.response_time_ns, r.has_incident).c_str(),
                  seconds_cell(r.kill_time_ns, r.has_incident).c_str(),
                  seconds_cell(r.detection_time_ns, r.has_incident).c_str(),
                  static_cast<unsigned long long>(r.drops));
    table_out << line << '\n';
    for (const auto& err : r.errors)
      table_out << "       ! " << err << '\n';
  }
}

void save_reports(const std::vector<ExperimentReport>& reports,
                  const std::string& machine_path) {
  ordered_json doc;
  doc["schema_version"] = 1;
  doc["reports"] = ordered_json::array();
  for (const auto& r : reports) doc["reports"].push_back(report_to_json(r));
  std::ofstream out(machine_path, std::ios::trunc);
  out << doc.dump(2) << '\n';
}

std::vector<ExperimentReport> load_reports(const std::string& machine_path) {
  std::ifstream in(machine_path);
  if (!in) throw ParseError(0, machine_path + ": cannot open");
  ordered_json doc;
  try {
    in >> doc;
  } catch (const std::exception& ex) {
    throw ParseError(0, machine_path + ": " + ex.what());
  }
  std::vector<ExperimentReport> reports;
  for (const auto& j : doc.at("reports")) reports.push_back(report_from_json(j));
  return reports;
}

}  // namespace rofbs
