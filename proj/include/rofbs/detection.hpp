#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rofbs/types.hpp"

namespace rofbs {

// Per-process behavioral features over one sliding window.
struct FeatureVector {
  std::int32_t pid = 0;
  std::uint64_t window_start = 0;
  std::uint64_t window_end = 0;
  double opens_per_sec = 0.0;
  std::uint32_t distinct_extensions = 0;
  std::uint32_t distinct_dirs = 0;
  std::uint32_t open_burst_max = 0;  // max opens in any 100 ms sub-window
  double scope_coverage = 0.0;       // fraction of protected corpus touched
};

struct DetectionConfig {
  std::uint64_t window_ns = 1'000'000'000ull;
  std::uint64_t stride_ns = 250'000'000ull;
  double rate_threshold = 20.0;        // R: opens/sec
  std::uint32_t extension_threshold = 5;  // K: distinct extensions
  double decision_threshold = 0.5;
  std::size_t protected_file_count = 0;  // denominator for scope_coverage
};

// Deterministic recount over the events of one pid inside one window.
FeatureVector collect_features(std::span<const FileOpenEvent> events,
                               std::int32_t pid, const DetectionConfig& config);

// Response/kill accounting for one incident.
// detection_time = response_time + kill_time by construction.
struct DetectionTimings {
  std::uint64_t activity_start = 0;  // first event of the flagged process
  std::uint64_t classified_at = 0;
  std::uint64_t killed_at = 0;
  std::uint64_t response_time_ns() const { return classified_at - activity_start; }
  std::uint64_t kill_time_ns() const { return killed_at - classified_at; }
  std::uint64_t detection_time_ns() const {
    return response_time_ns() + kill_time_ns();
  }
};

// Validates ordering; throws ClockInconsistency on killed_at < classified_at
// or classified_at < activity_start.
DetectionTimings make_detection_timings(std::uint64_t activity_start,
                                        std::uint64_t classified_at,
                                        std::uint64_t killed_at);

// Fraction of agreements x 100. Throws LengthMismatch (also for two empty
// sequences: the ratio is undefined, not 100).
double accuracy_against_labels(const std::vector<VerdictLabel>& predictions,
                               const std::vector<VerdictLabel>& labels);

class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual Verdict classify(const FeatureVector& fv) const = 0;
  virtual std::string name() const = 0;
};

// Built-in rule: malicious iff opens_per_sec >= R and
// distinct_extensions >= K. Score is monotone in both features and crosses
// the decision threshold exactly when both conditions hold.
class HeuristicClassifier : public Classifier {
 public:
  HeuristicClassifier(double rate_threshold, std::uint32_t extension_threshold,
                      double decision_threshold = 0.5);
  Verdict classify(const FeatureVector& fv) const override;
  std::string name() const override { return "heuristic"; }

 private:
  double rate_threshold_;
  std::uint32_t extension_threshold_;
  double decision_threshold_;
};

// Decision-forest inference over serialized models. Feature order:
// [opens_per_sec, distinct_extensions, distinct_dirs, open_burst_max,
//  scope_coverage]. Score is the mean of the trees' leaf values.
class ForestClassifier : public Classifier {
 public:
  struct Node {
    int feature = -1;       // -1 marks a leaf
    double threshold = 0.0;  // go left when feature value < threshold
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf score in [0,1]
  };
  ForestClassifier(std::vector<std::vector<Node>> trees,
                   double decision_threshold = 0.5);
  Verdict classify(const FeatureVector& fv) const override;
  std::string name() const override { return "forest"; }

 private:
  std::vector<std::vector<Node>> trees_;
  double decision_threshold_;
};

// Model file: JSON, either {"type":"heuristic","R":..,"K":..} or
// {"type":"forest","trees":[{"nodes":[...]}]}. Throws ModelLoadFailed /
// FeatureDimensionMismatch.
std::unique_ptr<Classifier> load_model(const std::string& path,
                                       double decision_threshold = 0.5);

// Per-pid sliding windows recomputed on a fixed stride. Verdicts latch:
// once malicious, a pid stays malicious. Single-writer; the orchestrator
// calls ingest/tick from one detection thread.
class SlidingWindowDetector {
 public:
  SlidingWindowDetector(DetectionConfig config,
                        std::shared_ptr<const Classifier> classifier);

  void ingest(const FileOpenEvent& event);

  // Recomputes all windows when the stride has elapsed; returns verdicts
  // that newly turned malicious. now_ns is the monotonic tick time and
  // becomes Verdict::decided_at.
  std::vector<Verdict> tick(std::uint64_t now_ns);

  std::uint64_t next_tick_deadline(std::uint64_t now_ns) const;
  std::optional<std::uint64_t> activity_start(std::int32_t pid) const;
  std::string comm_of(std::int32_t pid) const;
  // Tick timestamps, for feature-update gap instrumentation.
  const std::vector<std::uint64_t>& update_times() const { return update_times_; }

 private:
  DetectionConfig config_;
  std::shared_ptr<const Classifier> classifier_;
  std::map<std::int32_t, std::vector<FileOpenEvent>> windows_;
  std::map<std::int32_t, std::uint64_t> first_seen_;
  std::map<std::int32_t, std::string> comms_;
  std::map<std::int32_t, Verdict> latched_;
  std::uint64_t last_tick_ = 0;
  std::vector<std::uint64_t> update_times_;
};

}  // namespace rofbs
