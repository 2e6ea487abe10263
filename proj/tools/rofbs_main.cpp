#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rofbs/detection.hpp"
#include "rofbs/errors.hpp"
#include "rofbs/harness.hpp"
#include "rofbs/metrics.hpp"
#include "rofbs/orchestrator.hpp"
#include "rofbs/registry.hpp"

namespace {

std::string self_binary() {
  char buf[4096];
  const ssize_t n = ::readlink("/proc/self/exe", buf, sizeof(buf) - 1);
  if (n <= 0) return "rofbs";
  buf[n] = '\0';
  return buf;
}

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : std::move(fallback);
}

int cmd_corpus(const std::string& root, std::size_t files, std::uint64_t seed) {
  const auto manifest = rofbs::generate_victim_corpus(root, files, seed);
  std::cout << "generated " << manifest.entries.size() << " files under "
            << root << "\nmanifest: " << rofbs::manifest_path_for(root)
            << '\n';
  return 0;
}

int cmd_emulate(const std::string& manifest_path, const std::string& profile,
                const std::string& profile_file, const std::string& log_path,
                std::uint64_t key) {
  const auto manifest = rofbs::load_manifest(manifest_path);
  const rofbs::EmulatorProfile prof = profile_file.empty()
                                          ? rofbs::profile_by_name(profile)
                                          : rofbs::load_profile(profile_file);
  return rofbs::run_emulator(manifest, prof, log_path, key);
}

int cmd_benign(const std::string& manifest_path, double rate,
               std::uint64_t duration_ns, std::uint64_t seed,
               const std::string& log_path) {
  const auto manifest = rofbs::load_manifest(manifest_path);
  const auto log =
      rofbs::run_benign_workload(manifest, rate, duration_ns, seed);
  if (!log_path.empty()) rofbs::save_benign_log(log, log_path);
  std::cout << "benign workload opened " << log.size() << " files\n";
  return 0;
}

void print_run_report(const rofbs::RunReport& report) {
  std::cout << "mode=" << rofbs::to_string(report.mode)
            << " events=" << report.events_seen
            << " backups=" << report.backups_made
            << " drops=" << report.drops
            << " incidents=" << report.incidents.size() << '\n';
  for (const auto& inc : report.incidents) {
    std::cout << "incident pid=" << inc.pid << " comm=" << inc.comm
              << " score=" << inc.score
              << " response_s=" << inc.timings.response_time_ns() / 1e9
              << " kill_s=" << inc.timings.kill_time_ns() / 1e9
              << " detection_s=" << inc.timings.detection_time_ns() / 1e9
              << " restored=" << inc.restore.restored
              << " missing=" << inc.restore.backup_missing
              << (inc.kill_failed ? " KILL-FAILED" : "") << '\n';
  }
  for (const auto& err : report.errors) std::cout << "warning: " << err << '\n';
}

int cmd_daemon(const rofbs::RunConfig& config) {
  rofbs::BackupRegistry registry;
  rofbs::Orchestrator orch(config, registry);
  print_run_report(orch.run());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rofbs: snapshot-on-open backup daemon and experiment harness"};
  app.require_subcommand(1);

  // corpus generate
  auto* corpus = app.add_subcommand("corpus", "victim corpus tools");
  auto* corpus_gen = corpus->add_subcommand("generate", "build a seeded corpus");
  std::string corpus_root;
  std::size_t corpus_files = 200;
  std::uint64_t corpus_seed = 1;
  corpus_gen->add_option("--root", corpus_root, "corpus root")->required();
  corpus_gen->add_option("--files", corpus_files, "file count");
  corpus_gen->add_option("--seed", corpus_seed, "generator seed");

  // emulate
  auto* emulate = app.add_subcommand("emulate", "run the ransomware emulator");
  std::string em_manifest, em_profile = "medium", em_profile_file, em_log;
  std::uint64_t em_key = 0xC0FFEE;
  emulate->add_option("--manifest", em_manifest)->required();
  emulate->add_option("--profile", em_profile, "slow|medium|fast");
  emulate->add_option("--profile-file", em_profile_file, "profile JSON");
  emulate->add_option("--log", em_log, "emulation log path")->required();
  emulate->add_option("--key", em_key, "stream-cipher key");

  // benign
  auto* benign = app.add_subcommand("benign", "run the benign reader workload");
  std::string bn_manifest, bn_log;
  double bn_rate = 2.0;
  std::uint64_t bn_duration = 60'000'000'000ull, bn_seed = 1;
  benign->add_option("--manifest", bn_manifest)->required();
  benign->add_option("--rate", bn_rate, "opens per second");
  benign->add_option("--duration-ns", bn_duration);
  benign->add_option("--seed", bn_seed);
  benign->add_option("--log", bn_log);

  // daemon run / trace replay share a RunConfig
  std::vector<std::string> scope_dirs;
  std::string mode_name = env_or("ROFBS_MODE", "rofbs_alpha_async");
  std::string source_name = "fs_notify";
  std::string trace_path, journal_path, socket_path, model_path;
  std::string shutdown_name = "remove_backups";
  rofbs::DetectionConfig detection;
  rofbs::BackupConfig backup;
  bool stop_after_incident = true;

  auto add_daemon_opts = [&](CLI::App* cmd) {
    cmd->add_option("--scope", scope_dirs, "protected directories");
    cmd->add_option("--mode", mode_name, "rofbs_sync|rofbs_alpha_async");
    cmd->add_option("--journal", journal_path, "registry journal path");
    cmd->add_option("--socket", socket_path, "event fan-out socket");
    cmd->add_option("--model", model_path, "classifier model JSON");
    cmd->add_option("--shutdown", shutdown_name,
                    "remove_backups|restore_missing_originals|keep_backups");
    cmd->add_option("--rate-threshold", detection.rate_threshold);
    cmd->add_option("--extension-threshold", detection.extension_threshold);
    cmd->add_option("--suffix", backup.suffix, "backup suffix");
    cmd->add_flag("!--no-stop-after-incident", stop_after_incident);
  };

  auto* daemon = app.add_subcommand("daemon", "live protection daemon");
  auto* daemon_run = daemon->add_subcommand("run", "watch the scope");
  add_daemon_opts(daemon_run);
  daemon_run->add_option("--source", source_name,
                         "kernel_probe|fs_notify");

  auto* trace = app.add_subcommand("trace", "offline trace tools");
  auto* trace_replay = trace->add_subcommand("replay", "re-run a saved trace");
  add_daemon_opts(trace_replay);
  trace_replay->add_option("--trace", trace_path, "trace JSONL")->required();

  // experiment run
  auto* experiment = app.add_subcommand("experiment", "multi-trial studies");
  auto* exp_run = experiment->add_subcommand("run", "run trials end to end");
  rofbs::ExperimentConfig exp;
  int exp_trials = 3;
  std::string exp_scenario = "emulator", exp_mode = "rofbs_alpha_async";
  std::string exp_report_path;
  exp_run->add_option("--scenario", exp_scenario, "emulator|benign|replay");
  exp_run->add_option("--mode", exp_mode);
  exp_run->add_option("--workdir", exp.workdir)->required();
  exp_run->add_option("--trials", exp_trials);
  exp_run->add_option("--files", exp.corpus_files);
  exp_run->add_option("--seed", exp.corpus_seed);
  exp_run->add_option("--profile", exp.profile_name);
  exp_run->add_option("--benign-rate", exp.benign_rate);
  exp_run->add_option("--benign-duration-ns", exp.benign_duration_ns);
  exp_run->add_option("--rate-threshold", exp.detection.rate_threshold);
  exp_run->add_option("--extension-threshold", exp.detection.extension_threshold);
  exp_run->add_option("--copy-delay-ns", exp.backup.injected_copy_delay_ns,
                      "slow each copy down to provoke backlog");
  exp_run->add_option("--report", exp_report_path, "machine JSON output");
  exp_run->add_flag("--keep-workdir", exp.keep_workdir);

  // report render
  auto* report = app.add_subcommand("report", "report tools");
  auto* report_render = report->add_subcommand("render", "JSON to table");
  std::string report_in;
  report_render->add_option("--in", report_in)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*corpus_gen) return cmd_corpus(corpus_root, corpus_files, corpus_seed);
    if (*emulate)
      return cmd_emulate(em_manifest, em_profile, em_profile_file, em_log,
                         em_key);
    if (*benign)
      return cmd_benign(bn_manifest, bn_rate, bn_duration, bn_seed, bn_log);

    if (*daemon_run || *trace_replay) {
      rofbs::RunConfig config;
      if (scope_dirs.empty()) {
        const std::string env_scope = env_or("ROFBS_SCOPE", "");
        if (!env_scope.empty()) scope_dirs.push_back(env_scope);
      }
      config.scope = rofbs::ProtectedScope(scope_dirs);
      config.mode = rofbs::run_mode_from_string(mode_name);
      config.shutdown_policy =
          rofbs::shutdown_policy_from_string(shutdown_name);
      config.detection = detection;
      config.backup = backup;
      config.journal_path = journal_path;
      config.event_socket = socket_path;
      config.stop_after_incident = stop_after_incident;
      if (!model_path.empty())
        config.classifier = std::shared_ptr<const rofbs::Classifier>(
            rofbs::load_model(model_path));
      if (*trace_replay) {
        config.source_kind = rofbs::SourceKind::trace_replay;
        config.trace_path = trace_path;
        config.backup.suspend_enabled = false;
      } else {
        config.source_kind = rofbs::source_kind_from_string(source_name);
      }
      return cmd_daemon(config);
    }

    if (*exp_run) {
      if (exp_scenario == "emulator") exp.scenario = rofbs::Scenario::emulator;
      else if (exp_scenario == "benign") exp.scenario = rofbs::Scenario::benign;
      else if (exp_scenario == "replay") exp.scenario = rofbs::Scenario::replay;
      else throw rofbs::Error("unknown scenario: " + exp_scenario);
      exp.mode = rofbs::run_mode_from_string(exp_mode);
      exp.cli_binary = self_binary();
      const auto reports = rofbs::run_experiment(exp, exp_trials);
      rofbs::render_report(reports, std::cout);
      if (!exp_report_path.empty()) rofbs::save_reports(reports, exp_report_path);
      return 0;
    }

    if (*report_render) {
      rofbs::render_report(rofbs::load_reports(report_in), std::cout);
      return 0;
    }
  } catch (const rofbs::Error& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 3;
  } catch (const std::exception& ex) {
    std::cerr << "internal error: " << ex.what() << '\n';
    return 4;
  }
  return 0;
}
