#include "wide_loss.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "protonet/hierarchy.hpp"

namespace protonet::detail {

namespace {

using Vec = std::vector<Wide>;

#if defined(__SIZEOF_FLOAT128__) && !defined(__clang__)
Wide w_sqrt(Wide x) { return sqrtq(x); }
Wide w_exp(Wide x) { return expq(x); }
Wide w_log(Wide x) { return logq(x); }
Wide w_tanh(Wide x) { return tanhq(x); }
Wide w_atanh(Wide x) { return atanhq(x); }
#else
Wide w_sqrt(Wide x) { return std::sqrt(x); }
Wide w_exp(Wide x) { return std::exp(x); }
Wide w_log(Wide x) { return std::log(x); }
Wide w_tanh(Wide x) { return std::tanh(x); }
Wide w_atanh(Wide x) { return std::atanh(x); }
#endif

Wide dot(const Vec& a, const Vec& b) {
  Wide s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Vec scaled(const Vec& a, Wide s) {
  Vec out(a);
  for (auto& x : out) x *= s;
  return out;
}

Vec axpy(Wide a, const Vec& x, const Vec& y) {
  Vec out(y);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] += a * x[i];
  return out;
}

// clip to radius r, then the exponential map at the origin
Vec to_ball(const Vec& z, Wide c, Wide r) {
  const Wide n = w_sqrt(dot(z, z));
  const Vec clipped = n > r ? scaled(z, r / n) : z;
  const Wide s = w_sqrt(c) * w_sqrt(dot(clipped, clipped));
  return s == 0 ? clipped : scaled(clipped, w_tanh(s) / s);
}

Wide ball_distance(const Vec& x, const Vec& y, Wide c) {
  // |-x (+) y| for Mobius addition with curvature c
  const Vec mx = scaled(x, -1);
  const Wide xy = dot(mx, y), xx = dot(mx, mx), yy = dot(y, y);
  const Wide den = 1 + 2 * c * xy + c * c * xx * yy;
  const Vec num = axpy((1 - c * xx) / den, y, scaled(mx, (1 + 2 * c * xy + c * yy) / den));
  const Wide sc = w_sqrt(c);
  const Wide arg = std::min<Wide>(sc * w_sqrt(dot(num, num)), Wide(1) - Wide(1e-15));
  return 2 / sc * w_atanh(arg);
}

}  // namespace

WideLoss::WideLoss(const Episode& episode, const HeadConfig& head, const ClassHierarchy& h) : head_(head) {
  auto columns = [](const Matrix& m) {
    std::vector<Vec> out(static_cast<std::size_t>(m.cols()), Vec(static_cast<std::size_t>(m.rows())));
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = m(i, j);
    }
    return out;
  };
  support_ = columns(episode.support.x);
  query_ = columns(episode.query.x);

  const int top = h.height();
  const int first = head.metric == Metric::hierarchical ? 2 : top;
  const LevelWeights weights = level_weights(head.metric == Metric::hierarchical ? head.gamma : 1.0, top);
  for (int l = first; l <= top; ++l) {
    Level level;
    level.lambda = head.metric == Metric::hierarchical ? weights.at(l) : 1.0;
    std::map<std::string, std::size_t> index;
    for (const auto& label : episode.support.labels) index.emplace(h.ancestor_at_level(label, l), 0);
    std::size_t next = 0;
    for (auto& [node, i] : index) i = next++;
    level.nodes = index.size();
    for (const auto& label : episode.support.labels) level.support_node.push_back(index.at(h.ancestor_at_level(label, l)));
    for (const auto& label : episode.query.labels) level.query_node.push_back(index.at(h.ancestor_at_level(label, l)));
    levels_.push_back(std::move(level));
  }
}

Wide WideLoss::operator()(const std::vector<Wide>& weight, const std::vector<Wide>& bias) const {
  const std::size_t out_dim = bias.size();
  auto project = [&](const std::vector<Vec>& xs) {
    std::vector<Vec> zs;
    for (const auto& x : xs) {
      Vec z(bias);
      for (std::size_t j = 0; j < x.size(); ++j) {
        for (std::size_t i = 0; i < out_dim; ++i) z[i] += weight[j * out_dim + i] * x[j];
      }
      zs.push_back(std::move(z));
    }
    return zs;
  };
  std::vector<Vec> zs = project(support_), zq = project(query_);

  const Wide c = head_.c, r = head_.r, tau = head_.tau;
  const bool hyperbolic = head_.metric == Metric::hyperbolic;
  if (hyperbolic) {
    for (auto& z : zs) z = to_ball(z, c, r);
    for (auto& z : zq) z = to_ball(z, c, r);
  }

  Wide total = 0;
  for (const auto& level : levels_) {
    std::vector<Vec> protos(level.nodes, Vec(out_dim, Wide(0)));
    std::vector<Wide> mass(level.nodes, Wide(0));
    for (std::size_t s = 0; s < zs.size(); ++s) {
      const std::size_t k = level.support_node[s];
      Wide weight_s = 1;
      Vec point = zs[s];
      if (hyperbolic) {
        // Klein coordinates, weighted by the Lorentz factor
        point = scaled(point, 2 / (1 + c * dot(point, point)));
        weight_s = 1 / w_sqrt(1 - c * dot(point, point));
      }
      protos[k] = axpy(weight_s, point, protos[k]);
      mass[k] += weight_s;
    }
    for (std::size_t k = 0; k < level.nodes; ++k) {
      protos[k] = scaled(protos[k], 1 / mass[k]);
      if (hyperbolic) protos[k] = scaled(protos[k], 1 / (1 + w_sqrt(1 - c * dot(protos[k], protos[k]))));
      if (head_.metric == Metric::cosine) {
        const Wide n = w_sqrt(dot(protos[k], protos[k]));
        if (n > 0) protos[k] = scaled(protos[k], 1 / n);
      }
    }

    Wide level_loss = 0;
    for (std::size_t q = 0; q < zq.size(); ++q) {
      std::vector<Wide> logits(level.nodes);
      for (std::size_t k = 0; k < level.nodes; ++k) {
        Wide score;
        if (hyperbolic) {
          score = -ball_distance(zq[q], protos[k], c);
        } else if (head_.metric == Metric::cosine) {
          const Wide nq = w_sqrt(dot(zq[q], zq[q])), np = w_sqrt(dot(protos[k], protos[k]));
          score = nq == 0 || np == 0 ? Wide(0) : dot(zq[q], protos[k]) / (nq * np);
        } else {
          const Vec diff = axpy(-1, protos[k], zq[q]);
          score = -w_sqrt(dot(diff, diff));
        }
        logits[k] = score / tau;
      }
      const Wide m = *std::max_element(logits.begin(), logits.end());
      Wide z = 0;
      for (Wide l : logits) z += w_exp(l - m);
      level_loss += m + w_log(z) - logits[level.query_node[q]];
    }
    total += Wide(level.lambda) * level_loss / Wide(zq.size());
  }
  return total;
}

}  // namespace protonet::detail
