#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "protonet/dataset.hpp"
#include "protonet/heads.hpp"
#include "protonet/rng.hpp"

namespace protonet {

class ClassHierarchy;

struct EpisodeShape {
  int ways = 5;     // K
  int shots = 5;    // N support samples per class
  int queries = 15; // N' query samples per class

  /// Throws invalid-value unless K >= 2, N >= 1, N' >= 1.
  void validate() const;
};

/// Draws K classes without replacement from `classes`, then N + N' distinct
/// samples per class; the first N go to the support set. Classes and
/// per-class samples are laid out in sorted class order.
Episode sample_episode(const EmbeddingSet& data, std::span<const std::string> classes, const EpisodeShape& shape,
                       Rng& rng, std::uint64_t index = 0);

/// Episode `index` of the stream rooted at `master_seed`.
Episode sample_episode_at(const EmbeddingSet& data, std::span<const std::string> classes, const EpisodeShape& shape,
                          std::uint64_t master_seed, std::uint64_t index);

struct EpisodeResult {
  double accuracy = 0.0;  // leaf argmax == true label, fraction in [0, 1]
  /// Level l in 2..L. The hierarchical head predicts each level from its own
  /// prototypes; flat heads map the predicted leaf to its ancestor.
  std::map<int, double> level_accuracy;
  /// Always the leaf-mapped variant, for every head.
  std::map<int, double> level_accuracy_leaf_mapped;
  double hierarchical_precision = 0.0;
  std::size_t support_size = 0;
  std::size_t query_size = 0;
};

EpisodeResult evaluate_episode(const Episode& episode, const HeadConfig& cfg, const ClassHierarchy& h);

/// |anc(pred) & anc(truth)| / |anc(pred)| over ancestors at levels 2..L,
/// leaf included.
double hierarchical_precision(const std::string& predicted, const std::string& truth, const ClassHierarchy& h);

struct Interval {
  double mean = 0.0;
  double half_width = 0.0;
};

/// mean +- 1.96 * s / sqrt(M), s the sample standard deviation (0 when M = 1).
Interval confidence_interval(std::span<const double> values);

struct EvalOptions {
  EpisodeShape shape;
  int episodes = 1000;
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Aggregates over episodes; accuracies and P_H are percentages.
struct EvalReport {
  HeadConfig head;
  EvalOptions options;
  int height = 0;
  Interval overall;
  std::map<int, Interval> level;
  std::map<int, Interval> level_leaf_mapped;
  Interval hierarchical_precision;
  std::size_t support_per_episode = 0;
  std::size_t queries_per_episode = 0;
  bool ci_degenerate = false;  // M == 1
};

/// Evaluates `options.episodes` episodes drawn from `classes`. Episode i uses
/// an RNG seeded by derive_seed(seed, i), so the report does not depend on
/// the thread count.
EvalReport run_evaluation(const EmbeddingSet& data, std::span<const std::string> classes, const ClassHierarchy& h,
                          const HeadConfig& cfg, const EvalOptions& options);

/// Thread count from PROTONET_THREADS, or 1 when unset or invalid.
int default_thread_count();

}  // namespace protonet
