#include "rofbs/sources.hpp"

#include <fcntl.h>
#include <poll.h>
#include <sys/fanotify.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <vector>

#include "rofbs/clock.hpp"
#include "rofbs/errors.hpp"
#include "rofbs/trace.hpp"

namespace rofbs {

namespace fs = std::filesystem;

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string read_proc_comm(pid_t pid) {
  std::ifstream f("/proc/" + std::to_string(pid) + "/comm");
  std::string comm;
  if (f && std::getline(f, comm)) {
    if (comm.size() > 16) comm.resize(16);
    return comm;
  }
  return "?";
}

pid_t read_proc_ppid(pid_t pid) {
  std::ifstream f("/proc/" + std::to_string(pid) + "/stat");
  std::string stat;
  if (!f || !std::getline(f, stat)) return 0;
  // Field 4, after the parenthesized comm (which may contain spaces).
  auto close_paren = stat.rfind(')');
  if (close_paren == std::string::npos) return 0;
  pid_t ppid = 0;
  char state = 0;
  if (std::sscanf(stat.c_str() + close_paren + 1, " %c %d", &state, &ppid) != 2) {
    return 0;
  }
  return ppid;
}

struct FdCloser {
  int fd = -1;
  ~FdCloser() {
    if (fd >= 0) ::close(fd);
  }
};

// ---------------------------------------------------------------------------
// Trace replay

void replay_producer(std::string path, EventStream* stream) {
  auto queue = stream->queue();
  auto stats = stream->shared_stats();
  std::ifstream in(path);
  if (!in) {
    queue->close();
    return;
  }
  std::string line;
  std::size_t line_no = 0;
  std::uint64_t prev_ts = 0;
  bool have_prev = false;
  while (!stream->stopping() && std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    FileOpenEvent ev;
    try {
      ev = parse_trace_line(line, line_no);
    } catch (const ParseError& e) {
      std::cerr << "trace replay: " << path << ": " << e.what() << '\n';
      break;
    }
    if (have_prev && ev.timestamp < prev_ts) {
      if (stats->clock_skew.fetch_add(1) == 0) {
        std::cerr << "trace replay: non-monotonic timestamp at line " << line_no
                  << "; keeping file order\n";
      }
    }
    prev_ts = ev.timestamp;
    have_prev = true;
    if (!queue->push(std::move(ev))) break;  // replay blocks, never drops
  }
  queue->close();
}

// ---------------------------------------------------------------------------
// fanotify

struct FanotifyCtx {
  int fd = -1;
  ProtectedScope scope;
  std::string suffix;
  bool exclude_self = true;
};

void fanotify_producer(std::shared_ptr<FanotifyCtx> ctx, EventStream* stream) {
  auto queue = stream->queue();
  auto stats = stream->shared_stats();
  const pid_t self = ::getpid();
  std::vector<char> buf(1 << 16);

  while (!stream->stopping()) {
    pollfd pfd{ctx->fd, POLLIN, 0};
    int pr = ::poll(&pfd, 1, 200);
    if (pr <= 0) continue;
    ssize_t n = ::read(ctx->fd, buf.data(), buf.size());
    if (n <= 0) {
      if (errno == EAGAIN || errno == EINTR) continue;
      break;
    }
    const std::uint64_t ts = now_ns();
    auto* meta = reinterpret_cast<fanotify_event_metadata*>(buf.data());
    while (FAN_EVENT_OK(meta, n)) {
      if (meta->vers == FANOTIFY_METADATA_VERSION && meta->fd >= 0) {
        char link[64];
        std::snprintf(link, sizeof link, "/proc/self/fd/%d", meta->fd);
        char resolved[PATH_MAX];
        ssize_t len = ::readlink(link, resolved, sizeof resolved - 1);
        ::close(meta->fd);
        if (len > 0) {
          resolved[len] = '\0';
          std::string path(resolved);
          bool self_event = ctx->exclude_self && meta->pid == self;
          if (!self_event && ctx->scope.contains(path) &&
              !ends_with(path, ctx->suffix)) {
            FileOpenEvent ev;
            ev.pid = meta->pid;
            ev.ppid = read_proc_ppid(meta->pid);
            ev.comm = read_proc_comm(meta->pid);
            ev.timestamp = ts;
            ev.path = std::move(path);
            ev.source = SourceKind::fs_notify;
            if (!queue->try_push(std::move(ev))) stats->drops.fetch_add(1);
          }
        }
      } else if (meta->fd >= 0) {
        ::close(meta->fd);
      }
      meta = FAN_EVENT_NEXT(meta, n);
    }
  }
  ::close(ctx->fd);
  ctx->fd = -1;
  queue->close();
}

std::unique_ptr<EventStream> subscribe_fanotify(const ProtectedScope& scope,
                                                const SubscribeOptions& opt) {
  int fd = ::fanotify_init(FAN_CLASS_NOTIF | FAN_CLOEXEC | FAN_NONBLOCK,
                           O_RDONLY | O_CLOEXEC | O_LARGEFILE);
  if (fd < 0) {
    throw SourceUnavailable(std::string("fanotify_init: ") + std::strerror(errno));
  }
  FdCloser guard{fd};
  // One mark per directory: events fire for direct children, so the whole
  // scope tree is walked once at subscribe time.
  for (const auto& root : scope.directories()) {
    std::error_code ec;
    std::vector<std::string> dirs{root};
    for (fs::recursive_directory_iterator it(root, ec), end; it != end;
         it.increment(ec)) {
      if (ec) break;
      if (it->is_directory(ec)) dirs.push_back(it->path().string());
    }
    for (const auto& dir : dirs) {
      if (::fanotify_mark(fd, FAN_MARK_ADD, FAN_OPEN | FAN_EVENT_ON_CHILD,
                          AT_FDCWD, dir.c_str()) < 0) {
        throw SourceUnavailable("fanotify_mark " + dir + ": " +
                                std::strerror(errno));
      }
    }
  }
  auto ctx = std::make_shared<FanotifyCtx>();
  ctx->fd = fd;
  guard.fd = -1;  // ownership moved to producer
  ctx->scope = scope;
  ctx->suffix = opt.backup_suffix;
  ctx->exclude_self = opt.exclude_self;

  auto stream = std::make_unique<EventStream>(opt.queue_capacity);
  EventStream* raw = stream.get();
  stream->set_producer(std::thread(fanotify_producer, ctx, raw));
  return stream;
}

// ---------------------------------------------------------------------------
// Kernel probe via tracefs dynamic kprobes.
//
// Attaches a kprobe on the configured open symbol and parses trace_pipe
// output. Requires a writable tracefs; without it (unprivileged or masked
// /sys/kernel/tracing) attach fails and callers fall back to fs_notify.

std::string find_tracefs() {
  for (const char* base : {"/sys/kernel/tracing", "/sys/kernel/debug/tracing"}) {
    if (::access((std::string(base) + "/kprobe_events").c_str(), W_OK) == 0) {
      return base;
    }
  }
  return {};
}

struct KprobeCtx {
  std::string tracefs;
  ProtectedScope scope;
  std::string suffix;
  bool exclude_self = true;
};

constexpr const char* kProbeName = "rofbs_file_open";

void kprobe_detach(const std::string& tracefs) {
  std::ofstream enable(tracefs + "/events/kprobes/" + kProbeName + "/enable");
  if (enable) enable << "0\n";
  enable.close();
  std::ofstream events(tracefs + "/kprobe_events", std::ios::app);
  if (events) events << "-:" << kProbeName << "\n";
}

void kprobe_producer(std::shared_ptr<KprobeCtx> ctx, EventStream* stream) {
  auto queue = stream->queue();
  auto stats = stream->shared_stats();
  const pid_t self = ::getpid();
  int fd = ::open((ctx->tracefs + "/trace_pipe").c_str(),
                  O_RDONLY | O_NONBLOCK | O_CLOEXEC);
  std::string carry;
  std::vector<char> buf(1 << 16);
  while (fd >= 0 && !stream->stopping()) {
    pollfd pfd{fd, POLLIN, 0};
    if (::poll(&pfd, 1, 200) <= 0) continue;
    ssize_t n = ::read(fd, buf.data(), buf.size());
    if (n <= 0) continue;
    carry.append(buf.data(), n);
    std::size_t start = 0;
    for (std::size_t nl; (nl = carry.find('\n', start)) != std::string::npos;
         start = nl + 1) {
      std::string line = carry.substr(start, nl - start);
      // "  comm-PID  [cpu] d... ts: rofbs_file_open: (...) path="/a/b""
      auto mark = line.find(kProbeName);
      auto pq = line.find("path=\"");
      if (mark == std::string::npos || pq == std::string::npos) continue;
      auto pe = line.rfind('"');
      if (pe <= pq + 6) continue;
      std::string path = line.substr(pq + 6, pe - pq - 6);
      if (path.empty() || path.front() != '/') continue;  // relative opens
      pid_t pid = 0;
      {
        auto bracket = line.find('[');
        auto dash = line.rfind('-', bracket);
        if (dash != std::string::npos) {
          pid = std::atoi(line.c_str() + dash + 1);
        }
      }
      if (ctx->exclude_self && pid == self) continue;
      if (!ctx->scope.contains(path) || ends_with(path, ctx->suffix)) continue;
      FileOpenEvent ev;
      ev.pid = pid;
      ev.ppid = read_proc_ppid(pid);
      ev.comm = read_proc_comm(pid);
      ev.timestamp = now_ns();
      ev.path = std::move(path);
      ev.source = SourceKind::kernel_probe;
      if (!queue->try_push(std::move(ev))) stats->drops.fetch_add(1);
    }
    carry.erase(0, start);
  }
  if (fd >= 0) ::close(fd);
  kprobe_detach(ctx->tracefs);
  queue->close();
}

std::unique_ptr<EventStream> subscribe_kprobe(const ProtectedScope& scope,
                                              const SubscribeOptions& opt) {
  std::string tracefs = find_tracefs();
  if (tracefs.empty()) {
    throw ProbeAttachFailed(
        "no writable tracefs (kprobe_events); insufficient privilege or "
        "tracefs not mounted — fall back to fs_notify");
  }
  {
    std::ofstream events(tracefs + "/kprobe_events", std::ios::app);
    events << "p:" << kProbeName << " " << opt.kprobe_symbol
           << " path=+0($arg2):ustring\n";
    if (!events.flush()) {
      throw ProbeAttachFailed("kernel symbol not hookable: " + opt.kprobe_symbol);
    }
  }
  {
    std::ofstream enable(tracefs + "/events/kprobes/" + std::string(kProbeName) +
                         "/enable");
    enable << "1\n";
    if (!enable.flush()) {
      kprobe_detach(tracefs);
      throw ProbeAttachFailed("cannot enable kprobe event");
    }
  }
  auto ctx = std::make_shared<KprobeCtx>();
  ctx->tracefs = tracefs;
  ctx->scope = scope;
  ctx->suffix = opt.backup_suffix;
  ctx->exclude_self = opt.exclude_self;

  auto stream = std::make_unique<EventStream>(opt.queue_capacity);
  EventStream* raw = stream.get();
  stream->set_producer(std::thread(kprobe_producer, ctx, raw));
  return stream;
}

}  // namespace

std::unique_ptr<EventStream> replay_trace(const std::string& trace_path,
                                          std::size_t queue_capacity) {
  struct stat st{};
  if (::stat(trace_path.c_str(), &st) != 0) {
    throw SourceUnavailable("trace file missing: " + trace_path);
  }
  auto stream = std::make_unique<EventStream>(queue_capacity);
  EventStream* raw = stream.get();
  stream->set_producer(std::thread(replay_producer, trace_path, raw));
  return stream;
}

std::unique_ptr<EventStream> subscribe(const ProtectedScope& scope,
                                       SourceKind kind,
                                       const SubscribeOptions& options) {
  switch (kind) {
    case SourceKind::kernel_probe:
      return subscribe_kprobe(scope, options);
    case SourceKind::fs_notify:
      return subscribe_fanotify(scope, options);
    case SourceKind::trace_replay:
      if (options.trace_path.empty()) {
        throw SourceUnavailable("trace_replay requires a trace path");
      }
      return replay_trace(options.trace_path, options.queue_capacity);
  }
  throw SourceUnavailable("unknown source kind");
}

}  // namespace rofbs
