#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "rofbs/types.hpp"

namespace rofbs {

// One event per line, JSON object {ts_ns, pid, ppid, comm, path}, UTF-8,
// paths verbatim. The same schema is used by the trace replay source and
// the fan-out event socket.
std::string serialize_event(const FileOpenEvent& event);
FileOpenEvent parse_trace_line(const std::string& line, std::size_t line_no);

std::vector<FileOpenEvent> load_trace(const std::string& path);
void save_trace(const std::vector<FileOpenEvent>& events, const std::string& path);

}  // namespace rofbs
