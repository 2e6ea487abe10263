#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rofbs/detection.hpp"
#include "rofbs/harness.hpp"
#include "rofbs/orchestrator.hpp"

namespace rofbs {

struct BackupRatio {
  double percent = 0.0;  // exact rational, rounded half-up to 2 decimals
  bool fully_protected_vacuous = false;  // E = 0: nothing was encrypted
};

// BackupRatio[%] = backup_files / encrypted_files * 100. Values above 100
// are legal and passed through. E = 0 reports 100 with the vacuous flag.
// Throws NegativeCount.
BackupRatio backup_ratio(long long backup_files, long long encrypted_files);

std::string format_percent(double value);  // fixed, 2 decimals

enum class Scenario { emulator, benign, replay };

struct ExperimentConfig {
  Scenario scenario = Scenario::emulator;
  RunMode mode = RunMode::rofbs_alpha_async;
  std::string workdir;       // per-trial subdirectories are created here
  std::string cli_binary;    // rofbs binary used to exec the adversary
  std::size_t corpus_files = 200;
  std::uint64_t corpus_seed = 1;
  std::string profile_name = "medium";  // emulator scenario
  EmulatorProfile profile_override;     // used when profile_name is empty
  double benign_rate = 2.0;             // benign scenario, opens/sec
  std::uint64_t benign_duration_ns = 60'000'000'000ull;
  std::size_t replay_opens_per_file = 3;  // replay scenario
  DetectionConfig detection;
  BackupConfig backup;
  std::size_t backup_workers = 4;
  ShutdownPolicy shutdown_policy = ShutdownPolicy::remove_backups;
  bool keep_workdir = false;
  std::uint64_t source_settle_ns = 300'000'000ull;  // mark-before-launch delay
};

struct ExperimentReport {
  std::string mode;
  int trial = 0;
  std::string classifier_name;
  std::string scenario;
  std::uint64_t encrypted_files = 0;  // E
  std::uint64_t backup_files = 0;     // B
  double backup_ratio_percent = 0.0;
  bool ratio_vacuous = false;
  double protected_fraction = 0.0;  // |encrypted with valid backup| / E * 100
  bool has_incident = false;
  std::uint64_t response_time_ns = 0;
  std::uint64_t kill_time_ns = 0;
  std::uint64_t detection_time_ns = 0;
  std::uint64_t drops = 0;
  std::uint64_t duration_ns = 0;
  std::uint64_t events_seen = 0;
  std::vector<std::uint64_t> feature_update_gaps_ns;
  std::uint64_t first_restore_ns = 0;
  std::uint64_t killed_at_ns = 0;
  std::size_t restored = 0;
  std::size_t backup_missing = 0;
  std::size_t malicious_verdicts = 0;
  std::vector<std::string> errors;
};

// One full trial per index: fresh corpus (seed + trial), daemon in the
// configured mode, adversary as a separate OS process, metrics from corpus
// scan cross-checked against the emulation log. Per-trial failures are
// recorded in the report's errors; remaining trials proceed.
std::vector<ExperimentReport> run_experiment(const ExperimentConfig& config,
                                             int trials);

// Human table plus machine JSON. Pure: values pass through verbatim.
void render_report(const std::vector<ExperimentReport>& reports,
                   std::ostream& table_out);
void save_reports(const std::vector<ExperimentReport>& reports,
                  const std::string& machine_path);
std::vector<ExperimentReport> load_reports(const std::string& machine_path);

}  // namespace rofbs
