#include "protonet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "protonet/error.hpp"

namespace protonet {

namespace {

void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) {
    throw Error(ErrorCode::non_finite, std::string(what) + " has non-finite coordinates");
  }
}

void require_inside(const Vector& v, double c, const char* what) {
  require_finite(v, what);
  const double scaled = c * v.squaredNorm();
  if (!(scaled < 1.0)) {
    std::ostringstream msg;
    msg << what << " lies outside the open ball: c*|x|^2 = " << scaled;
    throw Error(ErrorCode::invalid_point, msg.str());
  }
}

template <typename A, typename B>
void require_compatible(const A& x, const B& y) {
  if (!(x.c == y.c)) {
    throw Error(ErrorCode::curvature_mismatch, "operands carry curvatures " + std::to_string(x.c.value()) +
                                                   " and " + std::to_string(y.c.value()));
  }
  if (x.dim() != y.dim()) {
    throw Error(ErrorCode::dimension_mismatch, "operands have dimensions " + std::to_string(x.dim()) + " and " +
                                                   std::to_string(y.dim()));
  }
}

// Lexicographic order on coordinates; used to fix the evaluation order of
// symmetric functions.
bool lex_less(const Vector& a, const Vector& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) return true;
    if (b[i] < a[i]) return false;
  }
  return false;
}

// (s sech^2 s - tanh s) / s^3, with its series near zero.
double exp0_curvature_term(double s) {
  if (s < 1e-2) {
    const double s2 = s * s;
    return -2.0 / 3.0 + s2 * (8.0 / 15.0 - s2 * (34.0 / 105.0));
  }
  const double t = std::tanh(s);
  const double sech2 = 1.0 - t * t;
  return (s * sech2 - t) / (s * s * s);
}

}  // namespace

Curvature::Curvature(double c) : c_(c), sqrt_c_(std::sqrt(c)) {
  if (!std::isfinite(c) || !(c > 0.0)) {
    throw Error(ErrorCode::invalid_curvature, "curvature parameter must be finite and > 0, got " + std::to_string(c));
  }
}

PoincarePoint::PoincarePoint(Vector coords_in, Curvature c_in) : coords(std::move(coords_in)), c(c_in) {
  require_inside(coords, c.value(), "Poincare point");
}

PoincarePoint PoincarePoint::origin(Eigen::Index dim, Curvature c) { return PoincarePoint(Vector::Zero(dim), c); }

KleinPoint::KleinPoint(Vector coords_in, Curvature c_in) : coords(std::move(coords_in)), c(c_in) {
  require_inside(coords, c.value(), "Klein point");
}

double conformal_factor(const PoincarePoint& x) { return 2.0 / (1.0 - x.c.value() * x.coords.squaredNorm()); }

PoincarePoint mobius_add(const PoincarePoint& x, const PoincarePoint& y) {
  require_compatible(x, y);
  return PoincarePoint(kernel::mobius_add(x.coords, y.coords, x.c.value()), x.c);
}

double poincare_distance(const PoincarePoint& x, const PoincarePoint& y) {
  require_compatible(x, y);
  return kernel::distance(x.coords, y.coords, x.c.value());
}

PoincarePoint exp_map(const PoincarePoint& z, const TangentVector& v) {
  require_finite(v.coords, "tangent vector");
  if (v.coords.size() != z.dim()) {
    throw Error(ErrorCode::dimension_mismatch, "tangent vector dimension " + std::to_string(v.coords.size()) +
                                                   " does not match base point dimension " +
                                                   std::to_string(z.dim()));
  }
  return PoincarePoint(kernel::exp_map(z.coords, v.coords, z.c.value()), z.c);
}

KleinPoint poincare_to_klein(const PoincarePoint& x) {
  return KleinPoint(kernel::poincare_to_klein(x.coords, x.c.value()), x.c);
}

PoincarePoint klein_to_poincare(const KleinPoint& k) {
  return PoincarePoint(kernel::klein_to_poincare(k.coords, k.c.value()), k.c);
}

KleinPoint einstein_midpoint(std::span<const KleinPoint> points) {
  if (points.empty()) {
    throw Error(ErrorCode::empty_list, "Einstein midpoint of an empty set");
  }
  const KleinPoint& first = points.front();
  Matrix columns(first.dim(), static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    require_compatible(first, points[i]);
    columns.col(static_cast<Eigen::Index>(i)) = points[i].coords;
  }
  return KleinPoint(kernel::einstein_midpoint(columns, first.c.value()), first.c);
}

Vector clip_features(const Vector& x, double r) {
  if (!(r > 0.0) || !std::isfinite(r)) {
    throw Error(ErrorCode::nonpositive_radius, "clip radius must be finite and > 0, got " + std::to_string(r));
  }
  require_finite(x, "feature vector");
  return kernel::clip(x, r);
}

std::pair<Vector, Vector> distance_gradient(const PoincarePoint& x, const PoincarePoint& y) {
  require_compatible(x, y);
  if (x.coords == y.coords) {
    throw Error(ErrorCode::coincident_points, "distance gradient is undefined at coincident points");
  }
  return kernel::distance_gradient(x.coords, y.coords, x.c.value());
}

namespace kernel {

void guard_ball(Vector& x, double c) {
  const double n2 = x.squaredNorm();
  if (c * n2 >= 1.0) {
    x *= (1.0 - kBallMargin) / (std::sqrt(c) * std::sqrt(n2));
  }
}

Vector mobius_add(const Vector& x, const Vector& y, double c) {
  const double xy = x.dot(y);
  const double x2 = x.squaredNorm();
  const double y2 = y.squaredNorm();
  const double num_x = 1.0 + 2.0 * c * xy + c * y2;
  const double num_y = 1.0 - c * x2;
  const double den = 1.0 + 2.0 * c * xy + c * c * x2 * y2;
  Vector out = (num_x * x + num_y * y) / den;
  guard_ball(out, c);
  return out;
}

double distance(const Vector& x, const Vector& y, double c) {
  const bool swap = lex_less(y, x);
  const Vector& a = swap ? y : x;
  const Vector& b = swap ? x : y;
  const double sqrt_c = std::sqrt(c);
  // sqrt(c)|-a (+) b| = s / D with s = sqrt(c)|a - b| and
  // D^2 = (1 - c|a|^2)(1 - c|b|^2) + s^2, which also gives 1 - s/D without
  // cancellation: artanh(s/D) = log1p(2 s (D + s) / A) / 2.
  const double s = sqrt_c * (a - b).norm();
  const double A = (1.0 - c * a.squaredNorm()) * (1.0 - c * b.squaredNorm());
  const double D = std::sqrt(A + s * s);
  if (!(A / (D * (D + s)) > 1.0 - kArtanhLimit)) return 2.0 / sqrt_c * std::atanh(kArtanhLimit);
  return std::log1p(2.0 * s * (D + s) / A) / sqrt_c;
}

Vector exp_map0(const Vector& v, double c) {
  const double n = v.norm();
  if (n == 0.0) return v;
  const double s = std::sqrt(c) * n;
  Vector out = (std::tanh(s) / s) * v;
  guard_ball(out, c);
  return out;
}

Vector exp_map(const Vector& z, const Vector& v, double c) {
  const double n = v.norm();
  if (n == 0.0) return z;
  const double sqrt_c = std::sqrt(c);
  const double lambda = 2.0 / (1.0 - c * z.squaredNorm());
  Vector step = (std::tanh(sqrt_c * lambda * n / 2.0) / (sqrt_c * n)) * v;
  guard_ball(step, c);
  return mobius_add(z, step, c);
}

Vector poincare_to_klein(const Vector& x, double c) {
  Vector out = (2.0 / (1.0 + c * x.squaredNorm())) * x;
  guard_ball(out, c);
  return out;
}

Vector klein_to_poincare(const Vector& k, double c) {
  const double s = std::sqrt(std::max(0.0, 1.0 - c * k.squaredNorm()));
  Vector out = k / (1.0 + s);
  guard_ball(out, c);
  return out;
}

Vector einstein_midpoint(const Matrix& points, double c) {
  Vector weighted = Vector::Zero(points.rows());
  double total = 0.0;
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    const double gamma = 1.0 / std::sqrt(1.0 - c * points.col(i).squaredNorm());
    weighted += gamma * points.col(i);
    total += gamma;
  }
  Vector out = weighted / total;
  guard_ball(out, c);
  return out;
}

Vector ball_midpoint(const Matrix& ball_points, double c) {
  const Eigen::Index n = ball_points.cols();
  Matrix klein(ball_points.rows(), n);
  Eigen::VectorXd gamma(n);
  double total = 0.0, inv_total = 0.0;
  Vector weighted = Vector::Zero(ball_points.rows());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = c * ball_points.col(i).squaredNorm();
    klein.col(i) = (2.0 / (1.0 + u)) * ball_points.col(i);
    gamma[i] = (1.0 + u) / (1.0 - u);
    weighted += gamma[i] * klein.col(i);
    total += gamma[i];
    inv_total += 1.0 / gamma[i];
  }
  const Vector mid = weighted / total;
  // total^2 (1 - c|mid|^2) = total * sum 1/gamma_i + c * total * sum gamma_i |k_i - mid|^2
  double spread = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) spread += gamma[i] * (klein.col(i) - mid).squaredNorm();
  const double deficit = (inv_total + c * spread) / total;
  Vector out = mid / (1.0 + std::sqrt(deficit));
  guard_ball(out, c);
  return out;
}

Vector clip(const Vector& x, double r) {
  const double n = x.norm();
  if (n <= r) return x;
  return (r / n) * x;
}

Vector clip_vjp(const Vector& x, double r, const Vector& g) {
  const double n = x.norm();
  if (n <= r) return g;
  const Vector unit = x / n;
  return (r / n) * (g - unit * unit.dot(g));
}

Vector exp_map0_vjp(const Vector& v, double c, const Vector& g) {
  const double n = v.norm();
  if (n == 0.0) return g;
  const double s = std::sqrt(c) * n;
  const double f = std::tanh(s) / s;
  return f * g + (c * exp0_curvature_term(s) * v.dot(g)) * v;
}

Vector poincare_to_klein_vjp(const Vector& x, double c, const Vector& g) {
  const double d = 1.0 + c * x.squaredNorm();
  return (2.0 / d) * g - (4.0 * c / (d * d) * x.dot(g)) * x;
}

Vector klein_to_poincare_vjp(const Vector& k, double c, const Vector& g) {
  const double s = std::sqrt(1.0 - c * k.squaredNorm());
  const double one_s = 1.0 + s;
  return g / one_s + (c / (s * one_s * one_s) * k.dot(g)) * k;
}

Matrix einstein_midpoint_vjp(const Matrix& points, double c, const Vector& g) {
  const Eigen::Index n = points.cols();
  Eigen::VectorXd gamma(n);
  Vector weighted = Vector::Zero(points.rows());
  for (Eigen::Index i = 0; i < n; ++i) {
    gamma[i] = 1.0 / std::sqrt(1.0 - c * points.col(i).squaredNorm());
    weighted += gamma[i] * points.col(i);
  }
  const double total = gamma.sum();
  const Vector mid = weighted / total;
  Matrix out(points.rows(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double gi = gamma[i];
    const double coupling = c * gi * gi * gi / total * (points.col(i) - mid).dot(g);
    out.col(i) = (gi / total) * g + coupling * points.col(i);
  }
  return out;
}

std::pair<Vector, Vector> distance_gradient(const Vector& x, const Vector& y, double c) {
  // d = acosh(1 + t) / sqrt(c) with t = 2c|x-y|^2 / ((1-c|x|^2)(1-c|y|^2)).
  const double alpha = 1.0 - c * x.squaredNorm();
  const double beta = 1.0 - c * y.squaredNorm();
  const Vector diff = x - y;
  const double delta = diff.squaredNorm();
  const double t = 2.0 * c * delta / (alpha * beta);
  const double dd_dt = 1.0 / (std::sqrt(c) * std::sqrt(t) * std::sqrt(t + 2.0));
  const double scale = dd_dt * 4.0 * c / (alpha * beta);
  Vector gx = scale * (diff + (c * delta / alpha) * x);
  Vector gy = scale * (-diff + (c * delta / beta) * y);
  return {std::move(gx), std::move(gy)};
}

}  // namespace kernel

}  // namespace protonet
