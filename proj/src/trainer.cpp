#include "protonet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "protonet/error.hpp"
#include "protonet/hierarchy.hpp"
#include "protonet/rng.hpp"
#include "wide_loss.hpp"

namespace protonet {

namespace {

constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kTrainStream = 1;
constexpr std::uint64_t kValStream = 2;

// Support columns grouped under the nodes of one level, plus each query's
// target node index.
struct LevelGroups {
  std::vector<std::string> nodes;
  std::vector<std::vector<Eigen::Index>> members;
  std::vector<std::size_t> targets;
};

template <typename NodeOf>
LevelGroups group_level(const Episode& ep, NodeOf&& node_of) {
  std::map<std::string, std::vector<Eigen::Index>> grouped;
  for (Eigen::Index m = 0; m < ep.support.size(); ++m) {
    grouped[node_of(ep.support.labels[static_cast<std::size_t>(m)])].push_back(m);
  }
  LevelGroups out;
  for (auto& [node, cols] : grouped) {
    out.nodes.push_back(node);
    out.members.push_back(std::move(cols));
  }
  for (const auto& label : ep.query.labels) {
    const std::string node = node_of(label);
    auto it = std::lower_bound(out.nodes.begin(), out.nodes.end(), node);
    if (it == out.nodes.end() || *it != node) {
      throw Error(ErrorCode::label_not_in_episode, "query label '" + label + "' has no prototype in this episode");
    }
    out.targets.push_back(static_cast<std::size_t>(it - out.nodes.begin()));
  }
  return out;
}

Matrix group_means(const Matrix& z, const LevelGroups& groups) {
  Matrix means(z.rows(), static_cast<Eigen::Index>(groups.nodes.size()));
  for (std::size_t j = 0; j < groups.members.size(); ++j) {
    Vector sum = Vector::Zero(z.rows());
    for (Eigen::Index m : groups.members[j]) sum += z.col(m);
    means.col(static_cast<Eigen::Index>(j)) = sum / static_cast<double>(groups.members[j].size());
  }
  return means;
}

// Adds weight * (-log softmax(logits)[target]) to `loss`; returns d/dlogits.
Vector cross_entropy_backward(const Vector& logits, std::size_t target, double weight, double& loss) {
  const double peak = logits.maxCoeff();
  const double lse = peak + std::log((logits.array() - peak).exp().sum());
  loss -= weight * (logits[static_cast<Eigen::Index>(target)] - lse);
  Vector grad = (logits.array() - lse).exp().matrix();
  grad[static_cast<Eigen::Index>(target)] -= 1.0;
  return weight * grad;
}

// Euclidean-distance or cosine logits for one level; accumulates gradients
// with respect to projected supports (gs) and queries (gq).
void euclidean_level(const Matrix& zs, const Matrix& zq, const LevelGroups& groups, const HeadConfig& cfg,
                     double weight, double& loss, Matrix& gs, Matrix& gq) {
  const Matrix means = group_means(zs, groups);
  const auto k = means.cols();
  const bool cosine = cfg.metric == Metric::cosine;

  Matrix unit = means;
  Vector mean_norms = Vector::Zero(k);
  if (cosine) {
    for (Eigen::Index j = 0; j < k; ++j) {
      mean_norms[j] = means.col(j).norm();
      if (mean_norms[j] > 0.0) unit.col(j) /= mean_norms[j];
    }
  }

  Matrix g_means = Matrix::Zero(means.rows(), k);
  const double per_query = weight / static_cast<double>(zq.cols());
  for (Eigen::Index i = 0; i < zq.cols(); ++i) {
    const Vector q = zq.col(i);
    Vector logits(k);
    for (Eigen::Index j = 0; j < k; ++j) {
      logits[j] = cosine ? cosine_similarity(q, unit.col(j)) / cfg.tau : -(q - means.col(j)).norm() / cfg.tau;
    }
    const Vector dlogits = cross_entropy_backward(logits, groups.targets[static_cast<std::size_t>(i)], per_query, loss);
    for (Eigen::Index j = 0; j < k; ++j) {
      if (cosine) {
        const double qn = q.norm();
        if (qn == 0.0 || mean_norms[j] == 0.0) continue;
        const Vector b = unit.col(j);
        const double cos = q.dot(b) / qn;
        const double coef = dlogits[j] / cfg.tau;
        gq.col(i) += coef * (b / qn - (cos / (qn * qn)) * q);
        g_means.col(j) += coef * ((q / qn - cos * b) / mean_norms[j]);
      } else {
        const Vector diff = q - means.col(j);
        const double n = diff.norm();
        if (n == 0.0) continue;  // subgradient 0 at coincident points
        const double coef = -dlogits[j] / (cfg.tau * n);
        gq.col(i) += coef * diff;
        g_means.col(j) -= coef * diff;
      }
    }
  }
  for (std::size_t j = 0; j < groups.members.size(); ++j) {
    const double share = 1.0 / static_cast<double>(groups.members[j].size());
    for (Eigen::Index m : groups.members[j]) gs.col(m) += share * g_means.col(static_cast<Eigen::Index>(j));
  }
}

void hyperbolic_level(const Matrix& zs, const Matrix& zq, const LevelGroups& groups, const HeadConfig& cfg,
                      double& loss, Matrix& gs, Matrix& gq) {
  const double c = cfg.c;
  const double r = cfg.r;
  const auto dim = zs.rows();

  Matrix s_clip(dim, zs.cols()), s_ball(dim, zs.cols()), s_klein(dim, zs.cols());
  for (Eigen::Index m = 0; m < zs.cols(); ++m) {
    s_clip.col(m) = kernel::clip(zs.col(m), r);
    s_ball.col(m) = kernel::exp_map0(s_clip.col(m), c);
    s_klein.col(m) = kernel::poincare_to_klein(s_ball.col(m), c);
  }

  const auto k = static_cast<Eigen::Index>(groups.nodes.size());
  std::vector<Matrix> member_klein(static_cast<std::size_t>(k));
  Matrix mids(dim, k), protos(dim, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const auto& members = groups.members[static_cast<std::size_t>(j)];
    Matrix& pts = member_klein[static_cast<std::size_t>(j)];
    pts.resize(dim, static_cast<Eigen::Index>(members.size()));
    Matrix balls(dim, static_cast<Eigen::Index>(members.size()));
    for (std::size_t t = 0; t < members.size(); ++t) {
      pts.col(static_cast<Eigen::Index>(t)) = s_klein.col(members[t]);
      balls.col(static_cast<Eigen::Index>(t)) = s_ball.col(members[t]);
    }
    mids.col(j) = kernel::einstein_midpoint(pts, c);
    protos.col(j) = kernel::ball_midpoint(balls, c);
  }

  Matrix q_clip(dim, zq.cols()), q_ball(dim, zq.cols());
  Matrix dist(zq.cols(), k);
  for (Eigen::Index i = 0; i < zq.cols(); ++i) {
    q_clip.col(i) = kernel::clip(zq.col(i), r);
    q_ball.col(i) = kernel::exp_map0(q_clip.col(i), c);
    for (Eigen::Index j = 0; j < k; ++j) dist(i, j) = kernel::distance(q_ball.col(i), protos.col(j), c);
  }
  const bool collapsed = (dist.array() == dist(0, 0)).all();

  Matrix g_protos = Matrix::Zero(dim, k);
  const double per_query = 1.0 / static_cast<double>(zq.cols());
  for (Eigen::Index i = 0; i < zq.cols(); ++i) {
    const Vector logits = -dist.row(i).transpose() / cfg.tau;
    const Vector dlogits = cross_entropy_backward(logits, groups.targets[static_cast<std::size_t>(i)], per_query, loss);
    Vector g_ball = Vector::Zero(dim);
    for (Eigen::Index j = 0; j < k; ++j) {
      if (q_ball.col(i) == protos.col(j)) {
        if (collapsed) continue;
        throw Error(ErrorCode::gradient_singularity,
                    "query " + std::to_string(i) + " coincides with prototype '" + groups.nodes[static_cast<std::size_t>(j)] + "'");
      }
      const auto [gx, gy] = kernel::distance_gradient(q_ball.col(i), protos.col(j), c);
      const double coef = -dlogits[j] / cfg.tau;
      g_ball += coef * gx;
      g_protos.col(j) += coef * gy;
    }
    gq.col(i) += kernel::clip_vjp(zq.col(i), r, kernel::exp_map0_vjp(q_clip.col(i), c, g_ball));
  }

  for (Eigen::Index j = 0; j < k; ++j) {
    const Vector g_mid = kernel::klein_to_poincare_vjp(mids.col(j), c, g_protos.col(j));
    const Matrix g_klein = kernel::einstein_midpoint_vjp(member_klein[static_cast<std::size_t>(j)], c, g_mid);
    const auto& members = groups.members[static_cast<std::size_t>(j)];
    for (std::size_t t = 0; t < members.size(); ++t) {
      const Eigen::Index m = members[t];
      const Vector g_ball = kernel::poincare_to_klein_vjp(s_ball.col(m), c, g_klein.col(static_cast<Eigen::Index>(t)));
      gs.col(m) += kernel::clip_vjp(zs.col(m), r, kernel::exp_map0_vjp(s_clip.col(m), c, g_ball));
    }
  }
}

void check_model(const ProjectionModel& model) {
  if (model.out_dim() < 1 || model.bias.size() != model.out_dim()) {
    throw Error(ErrorCode::dimension_mismatch, "projection has weight " + std::to_string(model.weight.rows()) + "x" +
                                                   std::to_string(model.weight.cols()) + " and bias " +
                                                   std::to_string(model.bias.size()));
  }
}

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

}  // namespace

ProjectionModel ProjectionModel::initialize(Eigen::Index in_dim, Eigen::Index out_dim, std::uint64_t seed) {
  if (in_dim < 1 || out_dim < 1) {
    throw Error(ErrorCode::invalid_value, "projection dimensions must be >= 1");
  }
  Rng rng(derive_seed(seed, kInitStream));
  const double bound = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  ProjectionModel model{Matrix(out_dim, in_dim), Vector::Zero(out_dim)};
  for (Eigen::Index col = 0; col < in_dim; ++col) {
    for (Eigen::Index row = 0; row < out_dim; ++row) model.weight(row, col) = bound * (2.0 * rng.uniform() - 1.0);
  }
  return model;
}

ProjectionModel ProjectionModel::identity(Eigen::Index dim) {
  return ProjectionModel{Matrix::Identity(dim, dim), Vector::Zero(dim)};
}

Vector forward_project(const ProjectionModel& model, const Vector& x) {
  check_model(model);
  if (x.size() != model.in_dim()) {
    throw Error(ErrorCode::dimension_mismatch, "input dimension " + std::to_string(x.size()) +
                                                   " vs projection input " + std::to_string(model.in_dim()));
  }
  return model.weight * x + model.bias;
}

Matrix forward_project(const ProjectionModel& model, const Matrix& x) {
  check_model(model);
  if (x.rows() != model.in_dim()) {
    throw Error(ErrorCode::dimension_mismatch, "input dimension " + std::to_string(x.rows()) +
                                                   " vs projection input " + std::to_string(model.in_dim()));
  }
  Matrix out = model.weight * x;
  out.colwise() += model.bias;
  return out;
}

EmbeddingSet project(const ProjectionModel& model, const EmbeddingSet& data) {
  return EmbeddingSet(data.ids(), data.labels(), forward_project(model, data.vectors()));
}

Episode project(const ProjectionModel& model, const Episode& episode) {
  Episode out = episode;
  out.support.x = forward_project(model, episode.support.x);
  out.query.x = forward_project(model, episode.query.x);
  return out;
}

Gradients loss_and_gradients(const ProjectionModel& model, const Episode& episode, const HeadConfig& head,
                             const ClassHierarchy& h) {
  head.validate();
  if (episode.support.size() == 0 || episode.query.size() == 0) {
    throw Error(ErrorCode::empty_class, "episode needs support and query samples");
  }
  const Matrix zs = forward_project(model, episode.support.x);
  const Matrix zq = forward_project(model, episode.query.x);
  Matrix gs = Matrix::Zero(zs.rows(), zs.cols());
  Matrix gq = Matrix::Zero(zq.rows(), zq.cols());
  double loss = 0.0;

  auto leaf_of = [](const std::string& label) { return label; };
  switch (head.metric) {
    case Metric::euclidean:
    case Metric::cosine:
      euclidean_level(zs, zq, group_level(episode, leaf_of), head, 1.0, loss, gs, gq);
      break;
    case Metric::hyperbolic:
      hyperbolic_level(zs, zq, group_level(episode, leaf_of), head, loss, gs, gq);
      break;
    case Metric::hierarchical: {
      const LevelWeights weights = level_weights(head.gamma, h.height());
      for (int l = 2; l <= h.height(); ++l) {
        auto node_of = [&](const std::string& label) {
          if (!h.is_leaf(label)) {
            throw Error(ErrorCode::unknown_label, "'" + label + "' is not a hierarchy leaf");
          }
          return h.ancestor_at_level(label, l);
        };
        double level_loss = 0.0;
        euclidean_level(zs, zq, group_level(episode, node_of), head, weights.at(l), level_loss, gs, gq);
        loss += level_loss;
      }
      break;
    }
  }

  Gradients out;
  out.loss = loss;
  out.weight = gs * episode.support.x.transpose() + gq * episode.query.x.transpose();
  out.bias = gs.rowwise().sum() + gq.rowwise().sum();
  return out;
}

OptimizerState OptimizerState::zeros_like(const ProjectionModel& model) {
  return OptimizerState{Matrix::Zero(model.weight.rows(), model.weight.cols()), Vector::Zero(model.bias.size())};
}

void sgd_step(ProjectionModel& model, const Gradients& grads, OptimizerState& state, const SgdConfig& cfg) {
  const auto same = [](const auto& a, const auto& b) { return a.rows() == b.rows() && a.cols() == b.cols(); };
  if (!same(model.weight, grads.weight) || !same(model.weight, state.weight_velocity) ||
      !same(model.bias, grads.bias) || !same(model.bias, state.bias_velocity)) {
    throw Error(ErrorCode::dimension_mismatch, "parameter, gradient and velocity shapes differ");
  }
  state.weight_velocity = cfg.momentum * state.weight_velocity + grads.weight + cfg.weight_decay * model.weight;
  state.bias_velocity = cfg.momentum * state.bias_velocity + grads.bias + cfg.weight_decay * model.bias;
  model.weight -= cfg.lr * state.weight_velocity;
  model.bias -= cfg.lr * state.bias_velocity;
}

TrainConfig TrainConfig::defaults_for(Metric metric) {
  TrainConfig cfg;
  cfg.head.metric = metric;
  if (metric == Metric::hyperbolic) cfg.sgd.lr = 1e-4;
  return cfg;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::invalid_value, what); };
  if (!(sgd.lr > 0.0) || !std::isfinite(sgd.lr)) fail("lr: must be > 0");
  if (!(sgd.momentum >= 0.0 && sgd.momentum < 1.0)) fail("momentum: must lie in [0, 1)");
  if (!(sgd.weight_decay >= 0.0) || !std::isfinite(sgd.weight_decay)) fail("weight_decay: must be >= 0");
  if (epochs < 0) fail("epochs: must be >= 0");
  if (episodes_per_epoch < 1) fail("episodes_per_epoch: must be >= 1");
  if (batch_episodes < 1) fail("batch_episodes: must be >= 1");
  if (val_episodes < 1) fail("val_episodes: must be >= 1");
  if (out_dim < 0) fail("out_dim: must be >= 0");
  shape.validate();
  head.validate();
}

TrainResult meta_train(const EmbeddingSet& data, const DatasetSplit& split, const ClassHierarchy& h,
                       const TrainConfig& cfg) {
  cfg.validate();
  if (split.base.empty() || split.val.empty()) {
    throw Error(ErrorCode::insufficient_classes, "training needs nonempty base and val splits");
  }
  const Eigen::Index out_dim = cfg.out_dim == 0 ? data.dim() : cfg.out_dim;

  TrainResult result;
  result.model = ProjectionModel::initialize(data.dim(), out_dim, cfg.seed);
  result.state = OptimizerState::zeros_like(result.model);
  result.best = result.model;
  result.best_val_accuracy = -1.0;

  const std::uint64_t train_seed = derive_seed(cfg.seed, kTrainStream);
  EvalOptions val_options{cfg.shape, cfg.val_episodes, derive_seed(cfg.seed, kValStream), cfg.threads};

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    int done = 0;
    while (done < cfg.episodes_per_epoch) {
      const int batch = std::min(cfg.batch_episodes, cfg.episodes_per_epoch - done);
      Gradients total{0.0, Matrix::Zero(out_dim, data.dim()), Vector::Zero(out_dim)};
      for (int b = 0; b < batch; ++b) {
        const auto index = static_cast<std::uint64_t>(epoch - 1) * static_cast<std::uint64_t>(cfg.episodes_per_epoch) +
                           static_cast<std::uint64_t>(done + b);
        const Episode ep = sample_episode_at(data, split.base, cfg.shape, train_seed, index);
        const Gradients g = loss_and_gradients(result.model, ep, cfg.head, h);
        total.loss += g.loss;
        total.weight += g.weight;
        total.bias += g.bias;
      }
      epoch_loss += total.loss;
      total.loss /= batch;
      total.weight /= batch;
      total.bias /= batch;
      sgd_step(result.model, total, result.state, cfg.sgd);
      done += batch;
    }

    if (!result.model.weight.allFinite() || !result.model.bias.allFinite()) {
      throw Error(ErrorCode::non_finite, "parameters diverged in epoch " + std::to_string(epoch));
    }
    const EvalReport val = run_evaluation(project(result.model, data), split.val, h, cfg.head, val_options);
    result.curve.push_back({epoch, epoch_loss / cfg.episodes_per_epoch, val.overall.mean});
    if (val.overall.mean > result.best_val_accuracy) {
      result.best_val_accuracy = val.overall.mean;
      result.best = result.model;
      result.best_epoch = epoch;
    }
  }
  if (cfg.epochs == 0) result.best_val_accuracy = 0.0;
  return result;
}

double default_gradcheck_threshold(Metric metric) {
  return metric == Metric::euclidean || metric == Metric::cosine ? 1e-5 : 1e-4;
}

GradCheckReport finite_difference_check(const ProjectionModel& model, const Episode& episode,
                                        const HeadConfig& head, const ClassHierarchy& h, double step,
                                        double threshold) {
  if (!(step > 0.0) || !std::isfinite(step)) {
    throw Error(ErrorCode::invalid_argument, "finite-difference step must be > 0, got " + std::to_string(step));
  }
  const Gradients analytic = loss_and_gradients(model, episode, head, h);

  const detail::WideLoss reference(episode, head, h);
  std::vector<detail::Wide> weight(model.weight.data(), model.weight.data() + model.weight.size());
  std::vector<detail::Wide> bias(model.bias.data(), model.bias.data() + model.bias.size());

  GradCheckReport report;
  report.threshold = threshold;
  report.step = step;
  report.reference_loss_gap = std::abs(static_cast<double>(reference(weight, bias)) - analytic.loss);
  auto numeric = [&](detail::Wide& param) {
    const detail::Wide saved = param;
    param = saved + step;
    const detail::Wide up = reference(weight, bias);
    param = saved - step;
    const detail::Wide down = reference(weight, bias);
    param = saved;
    return static_cast<double>((up - down) / (2 * detail::Wide(step)));
  };
  for (Eigen::Index i = 0; i < model.weight.size(); ++i) {
    const double err = relative_error(analytic.weight.data()[i], numeric(weight[static_cast<std::size_t>(i)]));
    report.max_rel_error_weight = std::max(report.max_rel_error_weight, err);
  }
  for (Eigen::Index i = 0; i < model.bias.size(); ++i) {
    const double err = relative_error(analytic.bias[i], numeric(bias[static_cast<std::size_t>(i)]));
    report.max_rel_error_bias = std::max(report.max_rel_error_bias, err);
  }
  report.parameters = static_cast<std::size_t>(model.weight.size() + model.bias.size());
  report.max_rel_error = std::max(report.max_rel_error_weight, report.max_rel_error_bias);
  report.passed = report.max_rel_error < threshold;
  return report;
}

}  // namespace protonet
