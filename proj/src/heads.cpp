#include "protonet/heads.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "protonet/error.hpp"
#include "protonet/hierarchy.hpp"

namespace protonet {

namespace {

void check_batch(const LabeledBatch& batch, const char* what) {
  if (static_cast<Eigen::Index>(batch.labels.size()) != batch.x.cols()) {
    throw Error(ErrorCode::dimension_mismatch, std::string(what) + " has " + std::to_string(batch.labels.size()) +
                                                   " labels for " + std::to_string(batch.x.cols()) + " vectors");
  }
  if (batch.x.cols() == 0) {
    throw Error(ErrorCode::empty_class, std::string(what) + " is empty");
  }
}

// Sorted group key -> member columns, in column order.
using Groups = std::map<std::string, std::vector<Eigen::Index>>;

Groups group_by_label(const LabeledBatch& batch) {
  Groups groups;
  for (Eigen::Index i = 0; i < batch.x.cols(); ++i) groups[batch.labels[static_cast<std::size_t>(i)]].push_back(i);
  return groups;
}

LevelPrototypes mean_prototypes(const Matrix& x, const Groups& groups) {
  LevelPrototypes level;
  level.centers.resize(x.rows(), static_cast<Eigen::Index>(groups.size()));
  Eigen::Index col = 0;
  for (const auto& [node, members] : groups) {
    if (members.empty()) {
      throw Error(ErrorCode::empty_class, "node '" + node + "' has no support samples");
    }
    Vector sum = Vector::Zero(x.rows());
    for (Eigen::Index m : members) sum += x.col(m);
    level.centers.col(col++) = sum / static_cast<double>(members.size());
    level.nodes.push_back(node);
  }
  return level;
}

double log_softmax_at(const Vector& logits, std::size_t target) {
  const double peak = logits.maxCoeff();
  const double lse = peak + std::log((logits.array() - peak).exp().sum());
  return logits[static_cast<Eigen::Index>(target)] - lse;
}

}  // namespace

std::string_view to_string(Metric metric) noexcept {
  switch (metric) {
    case Metric::euclidean: return "euclidean";
    case Metric::cosine: return "cosine";
    case Metric::hierarchical: return "hierarchical";
    case Metric::hyperbolic: return "hyperbolic";
  }
  return "unknown";
}

Metric parse_metric(std::string_view name) {
  for (Metric m : {Metric::euclidean, Metric::cosine, Metric::hierarchical, Metric::hyperbolic}) {
    if (name == to_string(m)) return m;
  }
  throw Error(ErrorCode::invalid_value,
              "metric: expected one of euclidean|cosine|hierarchical|hyperbolic, got '" + std::string(name) + "'");
}

void HeadConfig::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(tau)) throw Error(ErrorCode::invalid_value, "tau: must be > 0, got " + std::to_string(tau));
  if (metric == Metric::hyperbolic) {
    if (!positive(c)) throw Error(ErrorCode::invalid_value, "c: must be > 0, got " + std::to_string(c));
    if (!positive(r)) throw Error(ErrorCode::invalid_value, "r: must be > 0, got " + std::to_string(r));
  }
  if (metric == Metric::hierarchical && !positive(gamma)) {
    throw Error(ErrorCode::invalid_value, "gamma: must be > 0, got " + std::to_string(gamma));
  }
}

std::size_t LevelPrototypes::index_of(const std::string& node) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), node);
  if (it == nodes.end() || *it != node) {
    throw Error(ErrorCode::label_not_in_episode, "'" + node + "' has no prototype in this episode");
  }
  return static_cast<std::size_t>(it - nodes.begin());
}

int PrototypeSet::leaf_level() const {
  if (levels.empty()) throw Error(ErrorCode::empty_prototype_level, "prototype set is empty");
  return levels.rbegin()->first;
}

const LevelPrototypes& PrototypeSet::at(int level) const {
  auto it = levels.find(level);
  if (it == levels.end() || it->second.nodes.empty()) {
    throw Error(ErrorCode::empty_prototype_level, "no prototypes at level " + std::to_string(level));
  }
  return it->second;
}

PrototypeSet compute_prototypes(const LabeledBatch& support, const HeadConfig& cfg, int leaf_level) {
  if (cfg.metric == Metric::hyperbolic) return compute_hyperbolic_prototypes(support, cfg, leaf_level);
  check_batch(support, "support set");
  PrototypeSet out;
  LevelPrototypes level = mean_prototypes(support.x, group_by_label(support));
  if (cfg.metric == Metric::cosine) {
    for (Eigen::Index j = 0; j < level.centers.cols(); ++j) {
      const double n = level.centers.col(j).norm();
      if (n > 0.0) level.centers.col(j) /= n;
    }
  }
  out.levels.emplace(leaf_level, std::move(level));
  return out;
}

PrototypeSet compute_hierarchical_prototypes(const LabeledBatch& support, const ClassHierarchy& h) {
  check_batch(support, "support set");
  for (const auto& label : support.labels) {
    if (!h.is_leaf(label)) {
      throw Error(ErrorCode::unknown_label, "support label '" + label + "' is not a hierarchy leaf");
    }
  }
  PrototypeSet out;
  for (int l = 2; l <= h.height(); ++l) {
    Groups groups;
    for (Eigen::Index i = 0; i < support.x.cols(); ++i) {
      groups[h.ancestor_at_level(support.labels[static_cast<std::size_t>(i)], l)].push_back(i);
    }
    out.levels.emplace(l, mean_prototypes(support.x, groups));
  }
  return out;
}

PrototypeSet compute_hyperbolic_prototypes(const LabeledBatch& support, const HeadConfig& cfg, int leaf_level) {
  check_batch(support, "support set");
  const Curvature curvature(cfg.c);
  const Groups groups = group_by_label(support);
  LevelPrototypes level;
  level.centers.resize(support.x.rows(), static_cast<Eigen::Index>(groups.size()));
  Eigen::Index col = 0;
  for (const auto& [label, members] : groups) {
    Matrix ball(support.x.rows(), static_cast<Eigen::Index>(members.size()));
    Eigen::Index t = 0;
    for (Eigen::Index m : members) {
      const Vector clipped = clip_features(support.x.col(m), cfg.r);
      ball.col(t++) = exp_map(PoincarePoint::origin(clipped.size(), curvature), TangentVector{clipped}).coords;
    }
    level.centers.col(col++) = kernel::ball_midpoint(ball, curvature.value());
    level.nodes.push_back(label);
  }
  PrototypeSet out;
  out.levels.emplace(leaf_level, std::move(level));
  return out;
}

PrototypeSet build_prototypes(const LabeledBatch& support, const HeadConfig& cfg, const ClassHierarchy& h) {
  if (cfg.metric == Metric::hierarchical) return compute_hierarchical_prototypes(support, h);
  return compute_prototypes(support, cfg, h.height());
}

Vector map_query(const Vector& query, const HeadConfig& cfg) {
  if (cfg.metric != Metric::hyperbolic) return query;
  return kernel::exp_map0(clip_features(query, cfg.r), Curvature(cfg.c).value());
}

double cosine_similarity(const Vector& a, const Vector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

Vector class_logits_mapped(const Vector& q, const LevelPrototypes& level, const HeadConfig& cfg) {
  if (level.nodes.empty()) {
    throw Error(ErrorCode::empty_prototype_level, "cannot score against an empty prototype level");
  }
  if (q.size() != level.centers.rows()) {
    throw Error(ErrorCode::dimension_mismatch, "query dimension " + std::to_string(q.size()) +
                                                   " vs prototype dimension " +
                                                   std::to_string(level.centers.rows()));
  }
  Vector logits(static_cast<Eigen::Index>(level.size()));
  for (Eigen::Index j = 0; j < logits.size(); ++j) {
    const Vector p = level.centers.col(j);
    switch (cfg.metric) {
      case Metric::euclidean:
      case Metric::hierarchical:
        logits[j] = -(q - p).norm() / cfg.tau;
        break;
      case Metric::cosine:
        logits[j] = cosine_similarity(q, p) / cfg.tau;
        break;
      case Metric::hyperbolic:
        logits[j] = -kernel::distance(q, p, cfg.c) / cfg.tau;
        break;
    }
  }
  return logits;
}

Vector class_logits(const Vector& query, const LevelPrototypes& level, const HeadConfig& cfg) {
  return class_logits_mapped(map_query(query, cfg), level, cfg);
}

Vector class_probabilities(const Vector& query, const LevelPrototypes& level, const HeadConfig& cfg) {
  return softmax(class_logits(query, level, cfg));
}

Vector softmax(const Vector& logits) {
  const double peak = logits.maxCoeff();
  Vector e = (logits.array() - peak).exp().matrix();
  return e / e.sum();
}

std::size_t argmax(const Vector& values) {
  std::size_t best = 0;
  for (Eigen::Index i = 1; i < values.size(); ++i) {
    if (values[i] > values[static_cast<Eigen::Index>(best)]) best = static_cast<std::size_t>(i);
  }
  return best;
}

double episode_loss_flat(const Episode& episode, const PrototypeSet& prototypes, const HeadConfig& cfg) {
  check_batch(episode.query, "query set");
  const LevelPrototypes& level = prototypes.leaf();
  double total = 0.0;
  for (Eigen::Index i = 0; i < episode.query.x.cols(); ++i) {
    const std::size_t target = level.index_of(episode.query.labels[static_cast<std::size_t>(i)]);
    total -= log_softmax_at(class_logits(episode.query.x.col(i), level, cfg), target);
  }
  return total / static_cast<double>(episode.query.x.cols());
}

double episode_loss_hierarchical(const Episode& episode, const PrototypeSet& prototypes, const ClassHierarchy& h,
                                 const HeadConfig& cfg) {
  check_batch(episode.query, "query set");
  const LevelWeights weights = level_weights(cfg.gamma, h.height());
  double total = 0.0;
  for (int l = 2; l <= h.height(); ++l) {
    const LevelPrototypes& level = prototypes.at(l);
    double level_loss = 0.0;
    for (Eigen::Index i = 0; i < episode.query.x.cols(); ++i) {
      const auto& label = episode.query.labels[static_cast<std::size_t>(i)];
      if (!h.is_leaf(label)) {
        throw Error(ErrorCode::label_not_in_episode, "query label '" + label + "' is not a hierarchy leaf");
      }
      const std::size_t target = level.index_of(h.ancestor_at_level(label, l));
      level_loss -= log_softmax_at(class_logits(episode.query.x.col(i), level, cfg), target);
    }
    total += weights.at(l) * (level_loss / static_cast<double>(episode.query.x.cols()));
  }
  return total;
}

double episode_loss(const Episode& episode, const PrototypeSet& prototypes, const ClassHierarchy& h,
                    const HeadConfig& cfg) {
  if (cfg.metric == Metric::hierarchical) return episode_loss_hierarchical(episode, prototypes, h, cfg);
  return episode_loss_flat(episode, prototypes, cfg);
}

}  // namespace protonet
