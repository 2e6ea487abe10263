#include "rofbs/detection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "rofbs/errors.hpp"

namespace rofbs {

FeatureVector collect_features(std::span<const FileOpenEvent> events,
                               std::int32_t pid,
                               const DetectionConfig& config) {
  std::vector<std::uint64_t> timestamps;
  std::set<std::string> extensions;
  std::set<std::string> dirs;
  std::set<std::string> paths;
  for (const auto& ev : events) {
    if (ev.pid != pid) continue;
    timestamps.push_back(ev.timestamp);
    const std::string& p = ev.path;
    auto slash = p.rfind('/');
    std::string name = slash == std::string::npos ? p : p.substr(slash + 1);
    auto dot = name.rfind('.');
    if (dot != std::string::npos && dot != 0) extensions.insert(name.substr(dot));
    dirs.insert(slash == std::string::npos ? std::string() : p.substr(0, slash));
    paths.insert(p);
  }
  if (timestamps.empty()) throw NoEventsForPid(pid);
  std::sort(timestamps.begin(), timestamps.end());

  FeatureVector fv;
  fv.pid = pid;
  fv.window_end = std::max<std::uint64_t>(timestamps.back(), 1);
  fv.window_start = fv.window_end >= config.window_ns
                        ? fv.window_end - config.window_ns
                        : 0;
  fv.opens_per_sec =
      static_cast<double>(timestamps.size()) /
      (static_cast<double>(config.window_ns) / 1e9);
  fv.distinct_extensions = static_cast<std::uint32_t>(extensions.size());
  fv.distinct_dirs = static_cast<std::uint32_t>(dirs.size());

  // Max opens in any 100 ms sub-window: two pointers over sorted times.
  constexpr std::uint64_t kBurstWindow = 100'000'000ull;
  std::size_t lo = 0;
  std::uint32_t burst = 0;
  for (std::size_t hi = 0; hi < timestamps.size(); ++hi) {
    while (timestamps[hi] - timestamps[lo] > kBurstWindow) ++lo;
    burst = std::max(burst, static_cast<std::uint32_t>(hi - lo + 1));
  }
  fv.open_burst_max = burst;

  if (config.protected_file_count > 0) {
    fv.scope_coverage = std::min(
        1.0, static_cast<double>(paths.size()) /
                 static_cast<double>(config.protected_file_count));
  }
  return fv;
}

DetectionTimings make_detection_timings(std::uint64_t activity_start,
                                        std::uint64_t classified_at,
                                        std::uint64_t killed_at) {
  if (classified_at < activity_start) {
    throw ClockInconsistency("classified_at precedes activity_start");
  }
  if (killed_at < classified_at) {
    throw ClockInconsistency("killed_at precedes classified_at");
  }
  return DetectionTimings{activity_start, classified_at, killed_at};
}

double accuracy_against_labels(const std::vector<VerdictLabel>& predictions,
                               const std::vector<VerdictLabel>& labels) {
  if (predictions.size() != labels.size()) {
    throw LengthMismatch("prediction/label length mismatch");
  }
  if (predictions.empty()) {
    throw LengthMismatch("accuracy undefined for empty sequences");
  }
  std::size_t agree = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    agree += predictions[i] == labels[i] ? 1 : 0;
  }
  return 100.0 * static_cast<double>(agree) /
         static_cast<double>(predictions.size());
}

HeuristicClassifier::HeuristicClassifier(double rate_threshold,
                                         std::uint32_t extension_threshold,
                                         double decision_threshold)
    : rate_threshold_(rate_threshold),
      extension_threshold_(extension_threshold),
      decision_threshold_(decision_threshold) {}

Verdict HeuristicClassifier::classify(const FeatureVector& fv) const {
  // m = min of the two normalized features; score crosses the decision
  // threshold exactly at m = 1, i.e. when both rules hold.
  const double rate_part = fv.opens_per_sec / rate_threshold_;
  const double ext_part =
      static_cast<double>(fv.distinct_extensions) /
      static_cast<double>(extension_threshold_);
  const double m = std::min(rate_part, ext_part);
  double score;
  if (m <= 0.0) {
    score = 0.0;
  } else if (m < 1.0) {
    score = decision_threshold_ * m;
  } else {
    score = decision_threshold_ + (1.0 - decision_threshold_) * (1.0 - 1.0 / m);
  }
  Verdict v;
  v.pid = fv.pid;
  v.score = score;
  v.label = score >= decision_threshold_ ? VerdictLabel::malicious
                                         : VerdictLabel::benign;
  return v;
}

ForestClassifier::ForestClassifier(std::vector<std::vector<Node>> trees,
                                   double decision_threshold)
    : trees_(std::move(trees)), decision_threshold_(decision_threshold) {}

Verdict ForestClassifier::classify(const FeatureVector& fv) const {
  const double features[5] = {
      fv.opens_per_sec, static_cast<double>(fv.distinct_extensions),
      static_cast<double>(fv.distinct_dirs),
      static_cast<double>(fv.open_burst_max), fv.scope_coverage};
  double sum = 0.0;
  for (const auto& tree : trees_) {
    int idx = 0;
    while (idx >= 0 && static_cast<std::size_t>(idx) < tree.size() &&
           tree[idx].feature >= 0) {
      const Node& node = tree[idx];
      idx = features[node.feature] < node.threshold ? node.left : node.right;
    }
    if (idx < 0 || static_cast<std::size_t>(idx) >= tree.size()) {
      throw ModelLoadFailed("forest tree has dangling node index");
    }
    sum += tree[idx].value;
  }
  Verdict v;
  v.pid = fv.pid;
  v.score = trees_.empty() ? 0.0 : sum / static_cast<double>(trees_.size());
  v.label = v.score >= decision_threshold_ ? VerdictLabel::malicious
                                           : VerdictLabel::benign;
  return v;
}

std::unique_ptr<Classifier> load_model(const std::string& path,
                                       double decision_threshold) {
  std::ifstream in(path);
  if (!in) throw ModelLoadFailed("cannot open model file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ModelLoadFailed("model parse error: " + std::string(e.what()));
  }
  const std::string type = j.value("type", "");
  if (type == "heuristic") {
    return std::make_unique<HeuristicClassifier>(
        j.value("R", 20.0), j.value("K", 5u), decision_threshold);
  }
  if (type == "forest") {
    std::vector<std::vector<ForestClassifier::Node>> trees;
    if (!j.contains("trees") || !j["trees"].is_array()) {
      throw ModelLoadFailed("forest model missing trees array");
    }
    for (const auto& tj : j["trees"]) {
      std::vector<ForestClassifier::Node> tree;
      for (const auto& nj : tj.at("nodes")) {
        ForestClassifier::Node node;
        if (nj.contains("leaf")) {
          node.feature = -1;
          node.value = nj.at("leaf").get<double>();
        } else {
          node.feature = nj.at("feature").get<int>();
          if (node.feature < 0 || node.feature >= 5) {
            throw FeatureDimensionMismatch(
                "feature index out of range: " + std::to_string(node.feature));
          }
          node.threshold = nj.at("threshold").get<double>();
          node.left = nj.at("left").get<int>();
          node.right = nj.at("right").get<int>();
        }
        tree.push_back(node);
      }
      if (tree.empty()) throw ModelLoadFailed("empty tree in forest model");
      trees.push_back(std::move(tree));
    }
    return std::make_unique<ForestClassifier>(std::move(trees),
                                              decision_threshold);
  }
  throw ModelLoadFailed("unknown model type: '" + type + "'");
}

SlidingWindowDetector::SlidingWindowDetector(
    DetectionConfig config, std::shared_ptr<const Classifier> classifier)
    : config_(config), classifier_(std::move(classifier)) {}

void SlidingWindowDetector::ingest(const FileOpenEvent& event) {
  first_seen_.try_emplace(event.pid, event.timestamp);
  comms_.try_emplace(event.pid, event.comm);
  auto& window = windows_[event.pid];
  window.push_back(event);
  // Prune anything older than the window relative to the newest event.
  const std::uint64_t newest = window.back().timestamp;
  if (newest >= config_.window_ns) {
    const std::uint64_t cutoff = newest - config_.window_ns;
    std::erase_if(window,
                  [cutoff](const auto& ev) { return ev.timestamp < cutoff; });
  }
}

std::uint64_t SlidingWindowDetector::next_tick_deadline(
    std::uint64_t now) const {
  if (last_tick_ == 0) return now + config_.stride_ns;
  return last_tick_ + config_.stride_ns;
}

std::vector<Verdict> SlidingWindowDetector::tick(std::uint64_t now) {
  if (last_tick_ != 0 && now < last_tick_ + config_.stride_ns) return {};
  last_tick_ = now;
  update_times_.push_back(now);

  std::vector<Verdict> fresh;
  for (const auto& [pid, window] : windows_) {
    if (window.empty() || latched_.count(pid)) continue;
    FeatureVector fv = collect_features(window, pid, config_);
    Verdict v = classifier_->classify(fv);
    v.decided_at = now;
    if (v.label == VerdictLabel::malicious) {
      latched_[pid] = v;
      fresh.push_back(v);
    }
  }
  return fresh;
}

std::string SlidingWindowDetector::comm_of(std::int32_t pid) const {
  auto it = comms_.find(pid);
  return it == comms_.end() ? std::string() : it->second;
}

std::optional<std::uint64_t> SlidingWindowDetector::activity_start(
    std::int32_t pid) const {
  auto it = first_seen_.find(pid);
  if (it == first_seen_.end()) return std::nullopt;
  return it->second;
}

}  // namespace rofbs
