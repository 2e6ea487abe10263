#include "rofbs/path_frag.hpp"

#include "rofbs/errors.hpp"

namespace rofbs {

std::string reconstruct_path(const PathFragmentBatch& batch) {
  if (batch.fragments.empty()) throw EmptyFragments();
  std::size_t total = 0;
  for (const auto& frag : batch.fragments) {
    if (frag.empty() || frag.find('/') != std::string::npos ||
        frag.find('\0') != std::string::npos) {
      throw InvalidComponent(frag);
    }
    total += frag.size() + 1;
  }
  std::string path;
  path.reserve(total);
  for (auto it = batch.fragments.rbegin(); it != batch.fragments.rend(); ++it) {
    path.push_back('/');
    path.append(*it);
  }
  return path;
}

std::vector<std::string> split_leaf_first(const std::string& absolute_path) {
  std::vector<std::string> components;
  std::size_t end = absolute_path.size();
  while (end > 0) {
    std::size_t slash = absolute_path.rfind('/', end - 1);
    if (slash == std::string::npos) break;
    if (end - slash > 1) {
      components.push_back(absolute_path.substr(slash + 1, end - slash - 1));
    }
    end = slash;
  }
  return components;
}

std::optional<PathFragmentBatch> FragmentAssembler::feed(const Record& rec,
                                                         std::uint64_t now) {
  expire(now);
  auto key = std::make_pair(rec.pid, rec.seq);
  Pending& p = pending_[key];
  if (p.fragments.empty()) p.first_seen_ns = now;
  p.fragments[rec.index] = rec.fragment;
  if (rec.root_marker) p.last_index = rec.index;

  if (!p.last_index || p.fragments.size() != *p.last_index + 1) {
    return std::nullopt;
  }
  // Contiguity: map keys are 0..last_index exactly when size matches and the
  // largest key equals last_index.
  if (p.fragments.rbegin()->first != *p.last_index) return std::nullopt;

  PathFragmentBatch batch;
  batch.pid = rec.pid;
  batch.seq = rec.seq;
  batch.fragments.reserve(p.fragments.size());
  for (auto& [idx, frag] : p.fragments) batch.fragments.push_back(std::move(frag));
  pending_.erase(key);
  return batch;
}

std::size_t FragmentAssembler::expire(std::uint64_t now) {
  std::size_t expired = 0;
  for (auto it = pending_.begin(); it != pending_.end();) {
    if (now >= it->second.first_seen_ns &&
        now - it->second.first_seen_ns > ttl_ns_) {
      it = pending_.erase(it);
      ++expired;
    } else {
      ++it;
    }
  }
  dropped_ += expired;
  return expired;
}

}  // namespace rofbs
