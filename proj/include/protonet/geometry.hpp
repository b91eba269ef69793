#pragma once

// Poincare-ball and Klein-model arithmetic with curvature -c.
//
// Typed operations validate their inputs and return points that satisfy the
// ball invariant c*|x|^2 < 1. The `kernel` namespace holds the same maps on
// plain vectors plus their vector-Jacobian products; the trainer uses those
// directly on hot paths where the inputs are already known to be valid.

#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace protonet {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

class Curvature {
 public:
  /// Throws invalid-curvature unless c is finite and strictly positive.
  explicit Curvature(double c);

  double value() const noexcept { return c_; }
  double sqrt_value() const noexcept { return sqrt_c_; }

  friend bool operator==(const Curvature& a, const Curvature& b) noexcept { return a.c_ == b.c_; }

 private:
  double c_;
  double sqrt_c_;
};

struct PoincarePoint {
  PoincarePoint(Vector coords, Curvature c);

  /// Origin of the ball in dimension `dim`.
  static PoincarePoint origin(Eigen::Index dim, Curvature c);

  Eigen::Index dim() const noexcept { return coords.size(); }

  Vector coords;
  Curvature c;
};

struct KleinPoint {
  KleinPoint(Vector coords, Curvature c);

  Eigen::Index dim() const noexcept { return coords.size(); }

  Vector coords;
  Curvature c;
};

struct TangentVector {
  Vector coords;
};

/// 2 / (1 - c|x|^2).
double conformal_factor(const PoincarePoint& x);

PoincarePoint mobius_add(const PoincarePoint& x, const PoincarePoint& y);

/// Geodesic distance (2/sqrt(c)) * artanh(sqrt(c) * |-x (+) y|). Bitwise symmetric.
double poincare_distance(const PoincarePoint& x, const PoincarePoint& y);

PoincarePoint exp_map(const PoincarePoint& z, const TangentVector& v);

PoincarePoint klein_to_poincare(const KleinPoint& k);
KleinPoint poincare_to_klein(const PoincarePoint& x);

/// Lorentz-factor weighted mean in Klein coordinates.
KleinPoint einstein_midpoint(std::span<const KleinPoint> points);

/// min{1, r/|x|} * x; the zero vector maps to itself.
Vector clip_features(const Vector& x, double r);

/// Partial derivatives of poincare_distance with respect to x and y.
std::pair<Vector, Vector> distance_gradient(const PoincarePoint& x, const PoincarePoint& y);

namespace kernel {

inline constexpr double kArtanhLimit = 1.0 - 1e-15;
inline constexpr double kBallMargin = 1e-12;

/// Rescales `x` onto radius (1 - kBallMargin)/sqrt(c) when c|x|^2 >= 1.
void guard_ball(Vector& x, double c);

Vector mobius_add(const Vector& x, const Vector& y, double c);
double distance(const Vector& x, const Vector& y, double c);

/// exp map at the origin: tanh(sqrt(c)|v|) v / (sqrt(c)|v|).
Vector exp_map0(const Vector& v, double c);
Vector exp_map(const Vector& z, const Vector& v, double c);

Vector poincare_to_klein(const Vector& x, double c);
Vector klein_to_poincare(const Vector& k, double c);

/// Columns of `points` are Klein coordinates.
Vector einstein_midpoint(const Matrix& points, double c);

/// Poincare columns in, Poincare midpoint out; same value as
/// klein_to_poincare(einstein_midpoint(poincare_to_klein(...))) but the
/// 1 - c|m|^2 term is summed from positive parts, which keeps precision when
/// the points sit close to the boundary.
Vector ball_midpoint(const Matrix& ball_points, double c);

Vector clip(const Vector& x, double r);

// Vector-Jacobian products: given the upstream gradient `g` with respect to
// the op's output, return the gradient with respect to its input.

/// The kink |x| = r takes the identity branch.
Vector clip_vjp(const Vector& x, double r, const Vector& g);
Vector exp_map0_vjp(const Vector& v, double c, const Vector& g);
Vector poincare_to_klein_vjp(const Vector& x, double c, const Vector& g);
Vector klein_to_poincare_vjp(const Vector& k, double c, const Vector& g);
/// Returns one gradient column per input column.
Matrix einstein_midpoint_vjp(const Matrix& points, double c, const Vector& g);

/// Gradient of distance(x, y) with respect to (x, y). Undefined when x == y;
/// callers must check `x != y` first.
std::pair<Vector, Vector> distance_gradient(const Vector& x, const Vector& y, double c);

}  // namespace kernel

}  // namespace protonet
