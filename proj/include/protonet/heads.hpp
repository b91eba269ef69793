#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "protonet/dataset.hpp"
#include "protonet/geometry.hpp"

namespace protonet {

class ClassHierarchy;

enum class Metric { euclidean, cosine, hierarchical, hyperbolic };

std::string_view to_string(Metric metric) noexcept;
/// Throws invalid-value for unknown names.
Metric parse_metric(std::string_view name);

struct HeadConfig {
  Metric metric = Metric::euclidean;
  double tau = 1.0;    // softmax temperature
  double c = 0.01;     // curvature, hyperbolic head only
  double r = 1.0;      // clip radius, hyperbolic head only
  double gamma = 2.0;  // level-weight base, hierarchical head only

  /// Throws invalid-value naming the offending field.
  void validate() const;
};

/// Prototypes for the nodes of one hierarchy level, one column per node.
/// Nodes are sorted, so index order is label order.
struct LevelPrototypes {
  std::vector<std::string> nodes;
  Matrix centers;

  std::size_t size() const noexcept { return nodes.size(); }
  /// Index of `node`; throws label-not-in-episode.
  std::size_t index_of(const std::string& node) const;
};

struct PrototypeSet {
  std::map<int, LevelPrototypes> levels;

  int leaf_level() const;
  const LevelPrototypes& leaf() const { return levels.at(leaf_level()); }
  /// Throws empty-prototype-level when the level is absent.
  const LevelPrototypes& at(int level) const;
};

/// Per-class means stored at `leaf_level`. Cosine prototypes are renormalized
/// to unit length; the hyperbolic metric dispatches to
/// compute_hyperbolic_prototypes.
PrototypeSet compute_prototypes(const LabeledBatch& support, const HeadConfig& cfg, int leaf_level = 2);

/// Pooled support means for every ancestor node at levels 2..L.
PrototypeSet compute_hierarchical_prototypes(const LabeledBatch& support, const ClassHierarchy& h);

/// clip -> exp map at the origin -> Klein -> Einstein midpoint -> Poincare.
PrototypeSet compute_hyperbolic_prototypes(const LabeledBatch& support, const HeadConfig& cfg,
                                           int leaf_level = 2);

/// Prototypes appropriate for cfg.metric; `h` supplies the leaf level and,
/// for the hierarchical head, the ancestor structure.
PrototypeSet build_prototypes(const LabeledBatch& support, const HeadConfig& cfg, const ClassHierarchy& h);

/// Representation a query is compared in: clip then exp map for the
/// hyperbolic head, identity otherwise.
Vector map_query(const Vector& query, const HeadConfig& cfg);

/// Logits -d/tau (or +cos/tau) for an already mapped query.
Vector class_logits_mapped(const Vector& mapped_query, const LevelPrototypes& level, const HeadConfig& cfg);
Vector class_logits(const Vector& query, const LevelPrototypes& level, const HeadConfig& cfg);
Vector class_probabilities(const Vector& query, const LevelPrototypes& level, const HeadConfig& cfg);

Vector softmax(const Vector& logits);
/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(const Vector& values);

/// Cosine similarity, defined as 0 when either vector is zero.
double cosine_similarity(const Vector& a, const Vector& b);

/// Mean negative log-likelihood of the query labels at the leaf level.
double episode_loss_flat(const Episode& episode, const PrototypeSet& prototypes, const HeadConfig& cfg);

/// sum_l lambda_l * L_l over levels 2..L, each L_l scored against the level's
/// prototypes with the query's level-l ancestor as target.
double episode_loss_hierarchical(const Episode& episode, const PrototypeSet& prototypes, const ClassHierarchy& h,
                                 const HeadConfig& cfg);

/// Dispatches on cfg.metric.
double episode_loss(const Episode& episode, const PrototypeSet& prototypes, const ClassHierarchy& h,
                    const HeadConfig& cfg);

}  // namespace protonet
