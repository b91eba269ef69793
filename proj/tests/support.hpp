#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "protonet/dataset.hpp"
#include "protonet/geometry.hpp"
#include "protonet/hierarchy.hpp"
#include "protonet/rng.hpp"

namespace testing_support {

using protonet::Matrix;
using protonet::Vector;

inline Vector gaussian(protonet::Rng& rng, int dim) {
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v[i] = rng.normal();
  return v;
}

/// Uniform in the ball of radius fraction/sqrt(c).
inline Vector ball_point(protonet::Rng& rng, int dim, double c, double fraction = 0.95) {
  const Vector dir = gaussian(rng, dim).normalized();
  return dir * (fraction * std::pow(rng.uniform(), 1.0 / dim) / std::sqrt(c));
}

/// Two super-classes A, B over leaves a0..a2, b0..b2.
inline protonet::ClassHierarchy tree_2x3() {
  const std::vector<protonet::Edge> edges{{"root", "A"},  {"root", "B"},  {"A", "a0"}, {"A", "a1"},
                                          {"A", "a2"},    {"B", "b0"},    {"B", "b1"}, {"B", "b2"}};
  return protonet::ClassHierarchy::from_edges(edges);
}

inline protonet::ClassHierarchy flat_tree(const std::vector<std::string>& leaves) {
  std::vector<protonet::Edge> edges;
  for (const auto& l : leaves) edges.emplace_back("root", l);
  return protonet::ClassHierarchy::from_edges(edges);
}

inline protonet::LabeledBatch batch(std::vector<Vector> cols, std::vector<std::string> labels) {
  protonet::LabeledBatch b;
  b.x.resize(cols.front().size(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) b.x.col(static_cast<Eigen::Index>(i)) = cols[i];
  b.labels = std::move(labels);
  return b;
}

inline Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

/// Central difference of a scalar function along each coordinate.
template <class F>
Vector numeric_gradient(F&& f, const Vector& x, double h = 1e-6) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2 * h);
  }
  return g;
}

inline double max_rel_error(const Vector& a, const Vector& n) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(n[i]), 1e-8});
    worst = std::max(worst, std::abs(a[i] - n[i]) / denom);
  }
  return worst;
}

}  // namespace testing_support
