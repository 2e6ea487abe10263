#include "rofbs/harness.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <thread>

#include <json.hpp>

#include "rofbs/clock.hpp"
#include "rofbs/digest.hpp"
#include "rofbs/errors.hpp"

namespace rofbs {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

const char* kExtensions[] = {".pdf", ".docx", ".xlsx", ".pptx", ".txt", ".jpg",
                             ".png", ".gif",  ".zip",  ".csv",  ".html", ".xml"};

std::uint64_t xorshift64star(std::uint64_t& state) {
  state ^= state >> 12;
  state ^= state << 25;
  state ^= state >> 27;
  return state * 0x2545F4914F6CDD1Dull;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void sleep_until_ns(std::uint64_t target) {
  std::uint64_t now = now_ns();
  if (target > now) {
    std::this_thread::sleep_for(std::chrono::nanoseconds(target - now));
  }
}

}  // namespace

std::string manifest_path_for(const std::string& root) {
  std::string r = root;
  while (r.size() > 1 && r.back() == '/') r.pop_back();
  return r + ".manifest";
}

void save_manifest(const CorpusManifest& manifest,
                   const std::string& manifest_path) {
  std::ofstream out(manifest_path, std::ios::trunc);
  ordered_json header;
  header["root"] = manifest.root;
  header["seed"] = manifest.seed;
  header["n"] = manifest.entries.size();
  out << header.dump() << '\n';
  for (const auto& e : manifest.entries) {
    ordered_json j;
    j["path"] = e.relative_path;
    j["size"] = e.size;
    j["digest"] = e.digest;
    out << j.dump() << '\n';
  }
}

CorpusManifest load_manifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw RootMissing("manifest not found: " + manifest_path);
  CorpusManifest manifest;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, std::string("manifest: ") + e.what());
    }
    if (line_no == 1 && j.contains("root")) {
      manifest.root = j["root"].get<std::string>();
      manifest.seed = j.value("seed", std::uint64_t{0});
      continue;
    }
    ManifestEntry entry;
    entry.relative_path = j.at("path").get<std::string>();
    entry.size = j.at("size").get<std::uint64_t>();
    entry.digest = j.at("digest").get<std::string>();
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

CorpusManifest generate_victim_corpus(const std::string& root, std::size_t n,
                                      std::uint64_t seed) {
  fs::path root_path = fs::absolute(root).lexically_normal();
  std::error_code ec;
  if (fs::exists(root_path, ec) && !fs::is_empty(root_path, ec)) {
    throw RootNotEmpty(root_path.string());
  }
  fs::create_directories(root_path);

  CorpusManifest manifest;
  manifest.root = root_path.string();
  manifest.seed = seed;

  std::mt19937_64 rng(seed);
  const std::size_t dir_count = std::clamp<std::size_t>(n / 50, 1, 16);
  for (std::size_t d = 0; d < dir_count; ++d) {
    char name[8];
    std::snprintf(name, sizeof name, "d%02zu", d);
    fs::create_directories(root_path / name);
  }

  constexpr std::uint64_t kMinSize = 1024;
  constexpr std::uint64_t kMaxSize = 1024 * 1024;
  std::vector<char> buf;
  std::set<std::string> used;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t dir = rng() % dir_count;
    const char* ext = kExtensions[rng() % std::size(kExtensions)];
    std::string rel;
    do {
      char stem[16];
      std::snprintf(stem, sizeof stem, "%010llx",
                    static_cast<unsigned long long>(rng() & 0xffffffffffull));
      char dname[8];
      std::snprintf(dname, sizeof dname, "d%02zu", dir);
      rel = std::string(dname) + "/" + stem + ext;
    } while (!used.insert(rel).second);

    const std::uint64_t size = kMinSize + rng() % (kMaxSize - kMinSize + 1);
    buf.resize(size);
    std::uint64_t content_state = rng() | 1;
    for (std::size_t off = 0; off < size; off += 8) {
      std::uint64_t word = xorshift64star(content_state);
      std::memcpy(buf.data() + off, &word, std::min<std::size_t>(8, size - off));
    }

    const fs::path full = root_path / rel;
    std::ofstream f(full, std::ios::binary | std::ios::trunc);
    f.write(buf.data(), static_cast<std::streamsize>(size));
    if (!f) throw Error("write failed (disk full?): " + full.string());
    f.close();

    ManifestEntry entry;
    entry.relative_path = rel;
    entry.size = size;
    Sha256 h;
    h.update(buf.data(), size);
    entry.digest = h.finish_hex();
    manifest.entries.push_back(std::move(entry));
  }
  std::sort(manifest.entries.begin(), manifest.entries.end(),
            [](const auto& a, const auto& b) {
              return a.relative_path < b.relative_path;
            });
  save_manifest(manifest, manifest_path_for(manifest.root));
  return manifest;
}

EmulatorProfile profile_by_name(const std::string& name) {
  EmulatorProfile p;
  p.name = name;
  if (name == "slow") {
    // Conti-like steady pace.
    p.files_per_second = 5.0;
    p.open_write_gap_ns = ms_to_ns(50);
  } else if (name == "medium") {
    // AvosLocker-like: brisk but within default copy throughput.
    p.files_per_second = 50.0;
    p.open_write_gap_ns = ms_to_ns(15);
  } else if (name == "fast") {
    // IceFire-like: tuned to outpace the copy path. Several worker
    // processes spray opens in parallel, so suspending one of them does
    // not pause the others; the defense only wins while its queue is empty.
    p.files_per_second = 200.0;
    p.open_write_gap_ns = ms_to_ns(2);
    p.child_processes = 4;
  } else {
    throw Error("unknown emulator profile: " + name);
  }
  return p;
}

void save_profile(const EmulatorProfile& profile, const std::string& path) {
  ordered_json j;
  j["name"] = profile.name;
  j["files_per_second"] = profile.files_per_second;
  j["skip_extensions"] = profile.skip_extensions;
  j["ransom_extension"] = profile.ransom_extension;
  j["child_processes"] = profile.child_processes;
  j["order"] =
      profile.order == EmulatorProfile::Order::shuffled ? "shuffled" : "lexicographic";
  j["shuffle_seed"] = profile.shuffle_seed;
  j["open_write_gap_ns"] = profile.open_write_gap_ns;
  std::ofstream out(path, std::ios::trunc);
  out << j.dump(2) << '\n';
}

EmulatorProfile load_profile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open profile: " + path);
  nlohmann::json j;
  in >> j;
  EmulatorProfile p;
  p.name = j.value("name", "custom");
  p.files_per_second = j.value("files_per_second", 50.0);
  if (j.contains("skip_extensions")) {
    p.skip_extensions = j["skip_extensions"].get<std::vector<std::string>>();
  }
  p.ransom_extension = j.value("ransom_extension", ".locked");
  p.child_processes = j.value("child_processes", 0u);
  p.order = j.value("order", "lexicographic") == "shuffled"
                ? EmulatorProfile::Order::shuffled
                : EmulatorProfile::Order::lexicographic;
  p.shuffle_seed = j.value("shuffle_seed", std::uint64_t{0});
  p.open_write_gap_ns = j.value("open_write_gap_ns", std::uint64_t{15'000'000});
  return p;
}

void xor_stream_cipher(std::uint64_t key, std::span<char> data) {
  std::uint64_t state = key ? key : 0x9E3779B97F4A7C15ull;
  for (std::size_t off = 0; off < data.size(); off += 8) {
    std::uint64_t word = xorshift64star(state);
    const std::size_t len = std::min<std::size_t>(8, data.size() - off);
    for (std::size_t b = 0; b < len; ++b) {
      data[off + b] ^= static_cast<char>((word >> (8 * b)) & 0xff);
    }
  }
}

namespace {

// One worker's share of the encryption pass. Appends log lines to log_fd
// (O_APPEND, one write per line).
void emulate_worker(const std::vector<std::string>& files,
                    const fs::path& root, const EmulatorProfile& profile,
                    std::uint64_t key, int log_fd, std::uint32_t worker_id,
                    std::uint32_t worker_count) {
  const double per_worker_rate = profile.files_per_second /
                                 static_cast<double>(worker_count);
  const std::uint64_t interval =
      per_worker_rate > 0 ? static_cast<std::uint64_t>(1e9 / per_worker_rate)
                          : 0;
  const std::uint64_t start = now_ns();
  std::vector<char> buf;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (interval) sleep_until_ns(start + i * interval);
    const fs::path target = root / files[i];
    // Safety rail: never touch anything outside the corpus root.
    const std::string canonical = target.lexically_normal().string();
    if (canonical.compare(0, root.string().size(), root.string()) != 0) {
      continue;
    }

    const std::uint64_t t_open = now_ns();
    int fd = ::open(canonical.c_str(), O_RDWR | O_CLOEXEC);
    if (fd < 0) continue;  // already renamed/unlinked; not fatal

    struct stat st{};
    if (::fstat(fd, &st) != 0 || !S_ISREG(st.st_mode)) {
      ::close(fd);
      continue;
    }
    buf.resize(static_cast<std::size_t>(st.st_size));
    ssize_t got = ::pread(fd, buf.data(), buf.size(), 0);
    if (got < 0) {
      ::close(fd);
      continue;
    }
    buf.resize(static_cast<std::size_t>(got));

    if (profile.open_write_gap_ns) {
      std::this_thread::sleep_for(
          std::chrono::nanoseconds(profile.open_write_gap_ns));
    }

    xor_stream_cipher(key, buf);
    if (::pwrite(fd, buf.data(), buf.size(), 0) < 0) {
      ::close(fd);
      continue;
    }
    ::close(fd);

    const std::string locked = canonical + profile.ransom_extension;
    if (::rename(canonical.c_str(), locked.c_str()) != 0) continue;
    const std::uint64_t t_renamed = now_ns();

    ordered_json j;
    j["path"] = canonical;
    j["t_open_ns"] = t_open;
    j["t_renamed_ns"] = t_renamed;
    j["worker"] = worker_id;
    std::string line = j.dump();
    line.push_back('\n');
    [[maybe_unused]] ssize_t w = ::write(log_fd, line.data(), line.size());
  }
}

}  // namespace

int run_emulator(const CorpusManifest& manifest, const EmulatorProfile& profile,
                 const std::string& log_path, std::uint64_t key) {
  const fs::path root = fs::path(manifest.root).lexically_normal();

  std::vector<std::string> files;
  files.reserve(manifest.entries.size());
  for (const auto& entry : manifest.entries) {
    const bool skipped = std::any_of(
        profile.skip_extensions.begin(), profile.skip_extensions.end(),
        [&](const std::string& ext) { return ends_with(entry.relative_path, ext); });
    if (!skipped) files.push_back(entry.relative_path);
  }
  if (profile.order == EmulatorProfile::Order::shuffled) {
    std::mt19937_64 rng(profile.shuffle_seed);
    std::shuffle(files.begin(), files.end(), rng);
  }

  int log_fd = ::open(log_path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC,
                      0644);
  if (log_fd < 0) return 1;
  {
    ordered_json header;
    header["key"] = key;
    header["profile"] = profile.name;
    std::string line = header.dump();
    line.push_back('\n');
    [[maybe_unused]] ssize_t w = ::write(log_fd, line.data(), line.size());
  }

  const std::uint32_t workers = std::max<std::uint32_t>(1, profile.child_processes);
  if (workers == 1) {
    emulate_worker(files, root, profile, key, log_fd, 0, 1);
    ::close(log_fd);
    return 0;
  }

  std::vector<pid_t> children;
  for (std::uint32_t w = 0; w < workers; ++w) {
    std::vector<std::string> share;
    for (std::size_t i = w; i < files.size(); i += workers) {
      share.push_back(files[i]);
    }
    pid_t pid = ::fork();
    if (pid == 0) {
      emulate_worker(share, root, profile, key, log_fd, w, workers);
      ::_exit(0);
    }
    if (pid > 0) children.push_back(pid);
  }
  int status = 0;
  for (pid_t child : children) ::waitpid(child, &status, 0);
  ::close(log_fd);
  return 0;
}

EmulationLog load_emulation_log(const std::string& log_path) {
  std::ifstream in(log_path);
  if (!in) throw Error("cannot open emulation log: " + log_path);
  EmulationLog log;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, std::string("emulation log: ") + e.what());
    }
    if (j.contains("key")) {
      log.key = j["key"].get<std::uint64_t>();
      log.profile = j.value("profile", "");
      continue;
    }
    EmulationLogEntry entry;
    entry.path = j.at("path").get<std::string>();
    entry.t_open_ns = j.at("t_open_ns").get<std::uint64_t>();
    entry.t_renamed_ns = j.at("t_renamed_ns").get<std::uint64_t>();
    entry.worker = j.value("worker", 0u);
    log.entries.push_back(std::move(entry));
  }
  return log;
}

std::vector<BenignLogEntry> run_benign_workload(const CorpusManifest& manifest,
                                                double rate_per_sec,
                                                std::uint64_t duration_ns,
                                                std::uint64_t seed) {
  std::vector<BenignLogEntry> log;
  if (rate_per_sec <= 0 || manifest.entries.empty()) return log;
  const fs::path root(manifest.root);
  const std::uint64_t interval = static_cast<std::uint64_t>(1e9 / rate_per_sec);
  const std::uint64_t start = now_ns();
  std::mt19937_64 rng(seed);
  std::vector<char> buf(64 * 1024);
  for (std::size_t i = 0; start + i * interval < start + duration_ns; ++i) {
    sleep_until_ns(start + i * interval);
    if (now_ns() - start >= duration_ns) break;
    const auto& entry = manifest.entries[rng() % manifest.entries.size()];
    const std::string path = (root / entry.relative_path).string();
    const std::uint64_t t_open = now_ns();
    int fd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
    if (fd < 0) continue;
    [[maybe_unused]] ssize_t n = ::read(fd, buf.data(), buf.size());
    ::close(fd);
    log.push_back({path, t_open});
  }
  return log;
}

void save_benign_log(const std::vector<BenignLogEntry>& log,
                     const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  for (const auto& entry : log) {
    ordered_json j;
    j["path"] = entry.path;
    j["t_open_ns"] = entry.t_open_ns;
    out << j.dump() << '\n';
  }
}

std::vector<std::string> encrypted_entries(const CorpusManifest& manifest,
                                           const std::string& root,
                                           const std::string& ransom_extension) {
  const fs::path root_path(root);
  std::error_code ec;
  if (!fs::exists(root_path, ec)) throw RootMissing(root);
  std::vector<std::string> hit;
  for (const auto& entry : manifest.entries) {
    const fs::path original = root_path / entry.relative_path;
    const fs::path locked = original.string() + ransom_extension;
    if (fs::exists(locked, ec)) {
      hit.push_back(entry.relative_path);
    } else if (!fs::exists(original, ec)) {
      // Gone without a locked twin: still lost to the adversary.
      hit.push_back(entry.relative_path);
    } else if (auto digest = sha256_file(original.string());
               !digest || *digest != entry.digest) {
      hit.push_back(entry.relative_path);  // overwritten in place, not restored
    }
  }
  return hit;
}

std::size_t count_encrypted(const CorpusManifest& manifest,
                            const std::string& root,
                            const std::string& ransom_extension) {
  return encrypted_entries(manifest, root, ransom_extension).size();
}

}  // namespace rofbs
