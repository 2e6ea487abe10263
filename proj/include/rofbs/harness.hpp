#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace rofbs {

struct ManifestEntry {
  std::string relative_path;
  std::uint64_t size = 0;
  std::string digest;  // SHA-256 hex of generated content
};

struct CorpusManifest {
  std::string root;
  std::uint64_t seed = 0;
  std::vector<ManifestEntry> entries;  // sorted by relative_path
};

// Seeded synthetic victim corpus: n files across a small directory tree,
// >= 10 distinct extensions, sizes 1 KiB..1 MiB, reproducible bit-for-bit
// from (n, seed). Writes the manifest beside the root and returns it.
// Throws RootNotEmpty when the root already holds files.
CorpusManifest generate_victim_corpus(const std::string& root, std::size_t n,
                                      std::uint64_t seed);

std::string manifest_path_for(const std::string& root);
CorpusManifest load_manifest(const std::string& manifest_path);
void save_manifest(const CorpusManifest& manifest,
                   const std::string& manifest_path);

struct EmulatorProfile {
  std::string name = "medium";
  double files_per_second = 50.0;
  std::vector<std::string> skip_extensions = {".tmp", ".dll", ".bat", ".exe"};
  std::string ransom_extension = ".locked";
  std::uint32_t child_processes = 0;
  enum class Order { lexicographic, shuffled };
  Order order = Order::lexicographic;
  std::uint64_t shuffle_seed = 0;
  // Pause between opening a file and overwriting it. The defense hooks the
  // open; this is the window it has to win.
  std::uint64_t open_write_gap_ns = 15'000'000ull;
};

// Behavioral speed classes standing in for the slow/medium/fast regimes.
EmulatorProfile profile_by_name(const std::string& name);
EmulatorProfile load_profile(const std::string& path);
void save_profile(const EmulatorProfile& profile, const std::string& path);

struct EmulationLogEntry {
  std::string path;  // original absolute path
  std::uint64_t t_open_ns = 0;
  std::uint64_t t_renamed_ns = 0;
  std::uint32_t worker = 0;
};

struct EmulationLog {
  std::uint64_t key = 0;  // stream-cipher key, logged so tests can verify
  std::string profile;
  std::vector<EmulationLogEntry> entries;
};

// Involutive keyed stream cipher (xorshift64* keystream XOR). Applying it
// twice with the same key restores the input.
void xor_stream_cipher(std::uint64_t key, std::span<char> data);

// Encrypts the corpus in profile order: open, read, overwrite with cipher
// output, rename to name + ransom_extension, paced to files_per_second.
// Confined to the manifest root; any path escaping it aborts. Runs in the
// calling process — the CLI `emulate` subcommand is the separate-process
// entry point experiments use.
int run_emulator(const CorpusManifest& manifest, const EmulatorProfile& profile,
                 const std::string& log_path, std::uint64_t key);

EmulationLog load_emulation_log(const std::string& log_path);

struct BenignLogEntry {
  std::string path;
  std::uint64_t t_open_ns = 0;
};

// Read-only workload: opens random corpus files at <= rate for the given
// duration; never writes or renames.
std::vector<BenignLogEntry> run_benign_workload(const CorpusManifest& manifest,
                                                double rate_per_sec,
                                                std::uint64_t duration_ns,
                                                std::uint64_t seed);
void save_benign_log(const std::vector<BenignLogEntry>& log,
                     const std::string& path);

// Relative paths of manifest entries whose on-disk state is
// renamed-with-ransom-extension or digest-mismatched without restore.
// Throws RootMissing.
std::vector<std::string> encrypted_entries(const CorpusManifest& manifest,
                                           const std::string& root,
                                           const std::string& ransom_extension);

std::size_t count_encrypted(const CorpusManifest& manifest,
                            const std::string& root,
                            const std::string& ransom_extension);

}  // namespace rofbs
