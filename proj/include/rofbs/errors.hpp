#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rofbs {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyFragments : Error {
  EmptyFragments() : Error("fragment batch contains no components") {}
};

struct InvalidComponent : Error {
  explicit InvalidComponent(const std::string& frag)
      : Error("path fragment contains separator or NUL: '" + frag + "'") {}
};

struct ParseError : Error {
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line(line) {}
  std::size_t line;
};

struct ProbeAttachFailed : Error {
  using Error::Error;
};

struct SourceUnavailable : Error {
  using Error::Error;
};

struct NotARegularFile : Error {
  explicit NotARegularFile(const std::string& path)
      : Error("not a regular file: " + path) {}
};

struct ModelLoadFailed : Error {
  using Error::Error;
};

struct FeatureDimensionMismatch : Error {
  using Error::Error;
};

struct NoEventsForPid : Error {
  explicit NoEventsForPid(int pid)
      : Error("no events in window for pid " + std::to_string(pid)) {}
};

struct ClockInconsistency : Error {
  using Error::Error;
};

struct LengthMismatch : Error {
  using Error::Error;
};

struct NegativeCount : Error {
  using Error::Error;
};

struct RootNotEmpty : Error {
  explicit RootNotEmpty(const std::string& root)
      : Error("corpus root exists and is not empty: " + root) {}
};

struct RootMissing : Error {
  explicit RootMissing(const std::string& root)
      : Error("corpus root missing: " + root) {}
};

}  // namespace rofbs
