#include <algorithm>
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "rofbs/digest.hpp"
#include "rofbs/errors.hpp"
#include "rofbs/harness.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace rofbs;
using testsupport::TempDir;
using testsupport::read_file;
using testsupport::write_file;

namespace {

std::string ext_of(const std::string& rel) {
  const auto dot = rel.rfind('.');
  return dot == std::string::npos ? "" : rel.substr(dot);
}

}  // namespace

TEST_CASE("corpus generation is reproducible bit for bit") {
  TempDir tmp;
  const auto m1 = generate_victim_corpus(tmp.sub("c1"), 200, 7);
  const auto m2 = generate_victim_corpus(tmp.sub("c2"), 200, 7);

  REQUIRE(m1.entries.size() == 200);
  REQUIRE(m2.entries.size() == 200);
  CHECK(std::is_sorted(m1.entries.begin(), m1.entries.end(),
                       [](const auto& a, const auto& b) {
                         return a.relative_path < b.relative_path;
                       }));
  for (std::size_t i = 0; i < 200; ++i) {
    CHECK(m1.entries[i].relative_path == m2.entries[i].relative_path);
    CHECK(m1.entries[i].digest == m2.entries[i].digest);
    CHECK(m1.entries[i].size == m2.entries[i].size);
    // Digest in the manifest matches the bytes on disk.
    const auto on_disk =
        sha256_file(tmp.sub("c1") + "/" + m1.entries[i].relative_path);
    REQUIRE(on_disk.has_value());
    CHECK(*on_disk == m1.entries[i].digest);
    CHECK(m1.entries[i].size >= 1024);
    CHECK(m1.entries[i].size <= 1024 * 1024);
  }

  // A different seed moves every digest set.
  const auto m3 = generate_victim_corpus(tmp.sub("c3"), 200, 8);
  std::set<std::string> d1, d3;
  for (const auto& e : m1.entries) d1.insert(e.digest);
  for (const auto& e : m3.entries) d3.insert(e.digest);
  CHECK(d1 != d3);
}

TEST_CASE("corpus spans at least 10 extensions and the manifest round-trips") {
  TempDir tmp;
  const auto manifest = generate_victim_corpus(tmp.sub("c"), 150, 3);
  std::set<std::string> exts;
  for (const auto& e : manifest.entries) exts.insert(ext_of(e.relative_path));
  CHECK(exts.size() >= 10);

  const auto loaded = load_manifest(manifest_path_for(tmp.sub("c")));
  CHECK(loaded.seed == 3);
  CHECK(loaded.root == manifest.root);
  REQUIRE(loaded.entries.size() == manifest.entries.size());
  CHECK(loaded.entries[7].digest == manifest.entries[7].digest);
}

TEST_CASE("empty corpus and dirty root") {
  TempDir tmp;
  const auto manifest = generate_victim_corpus(tmp.sub("zero"), 0, 1);
  CHECK(manifest.entries.empty());

  write_file(tmp.sub("dirty/already.txt"), "x");
  CHECK_THROWS_AS(generate_victim_corpus(tmp.sub("dirty"), 5, 1),
                  RootNotEmpty);
}

TEST_CASE("xor stream cipher is involutive and key-sensitive") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::string data(1 + static_cast<std::size_t>(rng() % 4096), '\0');
    for (auto& c : data) c = static_cast<char>(rng());
    const std::string original = data;
    const std::uint64_t key = rng() | 1;
    xor_stream_cipher(key, std::span<char>(data.data(), data.size()));
    CHECK(data != original);  // 1+ bytes flipped with overwhelming odds
    xor_stream_cipher(key, std::span<char>(data.data(), data.size()));
    CHECK(data == original);
  }
  // A different key does not decrypt.
  std::string data = "the quick brown fox jumps over";
  const std::string original = data;
  xor_stream_cipher(123, std::span<char>(data.data(), data.size()));
  xor_stream_cipher(456, std::span<char>(data.data(), data.size()));
  CHECK(data != original);
}

TEST_CASE("emulator encrypts in order, skips the skip-list, stays confined") {
  TempDir tmp;
  const auto manifest = generate_victim_corpus(tmp.sub("c"), 60, 21);
  EmulatorProfile profile;
  profile.files_per_second = 2000.0;  // unthrottled for the test
  profile.open_write_gap_ns = 0;
  const std::uint64_t key = 0xBEEF;

  REQUIRE(run_emulator(manifest, profile, tmp.sub("em.jsonl"), key) == 0);

  const auto log = load_emulation_log(tmp.sub("em.jsonl"));
  CHECK(log.key == key);
  std::size_t skipped = 0;
  for (const auto& entry : manifest.entries) {
    const std::string original = tmp.sub("c") + "/" + entry.relative_path;
    const bool skip =
        std::find(profile.skip_extensions.begin(),
                  profile.skip_extensions.end(),
                  ext_of(entry.relative_path)) != profile.skip_extensions.end();
    if (skip) {
      ++skipped;
      CHECK(fs::exists(original));
      CHECK(!fs::exists(original + ".locked"));
      CHECK(*sha256_file(original) == entry.digest);  // untouched
    } else {
      CHECK(!fs::exists(original));
      REQUIRE(fs::exists(original + ".locked"));
      // Reversible: applying the cipher again restores the plaintext.
      std::string bytes = read_file(original + ".locked");
      xor_stream_cipher(key, std::span<char>(bytes.data(), bytes.size()));
      CHECK(sha256_hex(bytes) == entry.digest);
    }
  }
  CHECK(log.entries.size() == manifest.entries.size() - skipped);
  // Lexicographic order by default.
  CHECK(std::is_sorted(log.entries.begin(), log.entries.end(),
                       [](const auto& a, const auto& b) {
                         return a.path < b.path;
                       }));

  const auto hit = encrypted_entries(manifest, tmp.sub("c"), ".locked");
  CHECK(hit.size() == manifest.entries.size() - skipped);
  CHECK(count_encrypted(manifest, tmp.sub("c"), ".locked") == hit.size());
}

TEST_CASE("shuffled order is deterministic per seed") {
  TempDir tmp;
  const auto manifest = generate_victim_corpus(tmp.sub("c"), 40, 5);
  EmulatorProfile profile;
  profile.files_per_second = 2000.0;
  profile.open_write_gap_ns = 0;
  profile.order = EmulatorProfile::Order::shuffled;
  profile.shuffle_seed = 77;

  // Two runs over identical corpus copies visit files in the same order.
  const auto manifest2 = generate_victim_corpus(tmp.sub("c2"), 40, 5);
  REQUIRE(run_emulator(manifest, profile, tmp.sub("e1.jsonl"), 1) == 0);
  REQUIRE(run_emulator(manifest2, profile, tmp.sub("e2.jsonl"), 1) == 0);
  const auto l1 = load_emulation_log(tmp.sub("e1.jsonl"));
  const auto l2 = load_emulation_log(tmp.sub("e2.jsonl"));
  REQUIRE(l1.entries.size() == l2.entries.size());
  bool any_out_of_order = false;
  for (std::size_t i = 0; i < l1.entries.size(); ++i) {
    const auto rel1 = fs::path(l1.entries[i].path).filename();
    const auto rel2 = fs::path(l2.entries[i].path).filename();
    CHECK(rel1 == rel2);
    if (i > 0 && l1.entries[i].path < l1.entries[i - 1].path)
      any_out_of_order = true;
  }
  CHECK(any_out_of_order);  // actually shuffled, not lexicographic
}

TEST_CASE("emulator profiles round-trip through JSON") {
  TempDir tmp;
  auto p = profile_by_name("fast");
  p.shuffle_seed = 9;
  save_profile(p, tmp.sub("p.json"));
  const auto q = load_profile(tmp.sub("p.json"));
  CHECK(q.name == p.name);
  CHECK(q.files_per_second == doctest::Approx(p.files_per_second));
  CHECK(q.open_write_gap_ns == p.open_write_gap_ns);
  CHECK(q.child_processes == p.child_processes);
  CHECK(q.skip_extensions == p.skip_extensions);
  CHECK(q.shuffle_seed == 9);

  CHECK_THROWS_AS(profile_by_name("warp"), Error);
}

TEST_CASE("benign workload reads but never writes") {
  TempDir tmp;
  const auto manifest = generate_victim_corpus(tmp.sub("c"), 30, 2);
  const auto log =
      run_benign_workload(manifest, 1000.0, 50'000'000ull, 4);
  CHECK(!log.empty());
  // Every file is byte-identical afterwards.
  CHECK(count_encrypted(manifest, tmp.sub("c"), ".locked") == 0);
  // Same seed, same picks.
  const auto log2 =
      run_benign_workload(manifest, 1000.0, 50'000'000ull, 4);
  REQUIRE(log.size() == log2.size());
  for (std::size_t i = 0; i < log.size(); ++i)
    CHECK(log[i].path == log2[i].path);
}

TEST_CASE("count_encrypted flags missing roots and restored files") {
  TempDir tmp;
  const auto manifest = generate_victim_corpus(tmp.sub("c"), 10, 6);
  CHECK_THROWS_AS(count_encrypted(manifest, tmp.sub("nope"), ".locked"),
                  RootMissing);

  // Overwrite-in-place without a rename still counts.
  const auto& victim = manifest.entries.front();
  write_file(tmp.sub("c") + "/" + victim.relative_path, "garbage");
  CHECK(count_encrypted(manifest, tmp.sub("c"), ".locked") == 1);
}
