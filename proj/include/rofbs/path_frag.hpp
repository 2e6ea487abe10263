#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rofbs/types.hpp"

namespace rofbs {

// Joins leaf-first components into a root-anchored absolute path.
// ["file.txt","docs","home"] -> "/home/docs/file.txt".
std::string reconstruct_path(const PathFragmentBatch& batch);

// Inverse helper: components of an absolute path, leaf first.
std::vector<std::string> split_leaf_first(const std::string& absolute_path);

// Reassembles bounded-size fragment records into complete batches. Records
// carry (pid, seq, index, fragment); the record flagged root_marker is the
// final (root-most) component. Partial batches older than the TTL are
// dropped and counted.
class FragmentAssembler {
 public:
  struct Record {
    std::int32_t pid = 0;
    std::uint64_t seq = 0;
    std::uint32_t index = 0;  // 0 = leaf
    std::string fragment;
    bool root_marker = false;
  };

  explicit FragmentAssembler(std::uint64_t ttl_ns = 100'000'000ull)
      : ttl_ns_(ttl_ns) {}

  // Returns the completed batch when this record finishes one.
  std::optional<PathFragmentBatch> feed(const Record& rec, std::uint64_t now_ns);

  // Drops partial batches whose first record is older than the TTL.
  std::size_t expire(std::uint64_t now_ns);

  std::uint64_t dropped() const { return dropped_; }

 private:
  struct Pending {
    std::map<std::uint32_t, std::string> fragments;
    std::optional<std::uint32_t> last_index;
    std::uint64_t first_seen_ns = 0;
  };

  std::uint64_t ttl_ns_;
  std::uint64_t dropped_ = 0;
  std::map<std::pair<std::int32_t, std::uint64_t>, Pending> pending_;
};

}  // namespace rofbs
