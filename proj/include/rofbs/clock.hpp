#pragma once

#include <cstdint>
#include <ctime>

namespace rofbs {

// Monotonic nanoseconds. All event timestamps and timing measurements use
// this clock so durations computed across threads and processes on one host
// are comparable.
inline std::uint64_t now_ns() {
  timespec ts{};
  clock_gettime(CLOCK_MONOTONIC, &ts);
  return static_cast<std::uint64_t>(ts.tv_sec) * 1'000'000'000ull +
         static_cast<std::uint64_t>(ts.tv_nsec);
}

constexpr std::uint64_t ms_to_ns(std::uint64_t ms) { return ms * 1'000'000ull; }
constexpr std::uint64_t s_to_ns(std::uint64_t s) { return s * 1'000'000'000ull; }

}  // namespace rofbs
