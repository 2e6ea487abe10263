#include "rofbs/trace.hpp"

#include <fstream>

#include <json.hpp>

#include "rofbs/errors.hpp"

namespace rofbs {

using ordered_json = nlohmann::ordered_json;

std::string serialize_event(const FileOpenEvent& event) {
  ordered_json j;
  j["ts_ns"] = event.timestamp;
  j["pid"] = event.pid;
  j["ppid"] = event.ppid;
  j["comm"] = event.comm;
  j["path"] = event.path;
  return j.dump();
}

FileOpenEvent parse_trace_line(const std::string& line, std::size_t line_no) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(line_no, e.what());
  }
  FileOpenEvent ev;
  try {
    ev.timestamp = j.at("ts_ns").get<std::uint64_t>();
    ev.pid = j.at("pid").get<std::int32_t>();
    ev.ppid = j.at("ppid").get<std::int32_t>();
    ev.comm = j.at("comm").get<std::string>();
    ev.path = j.at("path").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(line_no, e.what());
  }
  if (ev.comm.size() > 16) ev.comm.resize(16);
  if (ev.path.empty() || ev.path.front() != '/') {
    throw ParseError(line_no, "path is not absolute: " + ev.path);
  }
  ev.source = SourceKind::trace_replay;
  return ev;
}

std::vector<FileOpenEvent> load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SourceUnavailable("cannot open trace file: " + path);
  std::vector<FileOpenEvent> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    events.push_back(parse_trace_line(line, line_no));
  }
  return events;
}

void save_trace(const std::vector<FileOpenEvent>& events,
                const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw SourceUnavailable("cannot write trace file: " + path);
  for (const auto& ev : events) out << serialize_event(ev) << '\n';
}

}  // namespace rofbs
