#pragma once

// Hyperboloid and Poincaré-ball models of hyperbolic space, the maps between
// them, and the Euclidean/spherical distances used alongside them. All
// quantities are double precision; dimensions are runtime-sized.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>

#include "hyperproto/matrix.hpp"

namespace hyperproto {

/// acosh/atanh/acos arguments this close outside their domain are clamped;
/// further out is a NumericError.
inline constexpr double kClampTolerance = 1e-12;
/// Relative tolerance of the hyperboloid constraint <x,x>_L = 1/k.
inline constexpr double kHyperboloidTolerance = 1e-9;
/// Absolute tolerance of the tangency constraint <base,v>_L = 0.
inline constexpr double kTangencyTolerance = 1e-9;
/// Results of Möbius addition and Exp_0 are kept within this fraction of the
/// ball radius.
inline constexpr double kBallMargin = 1e-12;

enum class SpaceKind { EuclideanSquared, PoincareBall, FixedRadiusSphere };

std::string_view to_string(SpaceKind kind);

/// The metric space prototypes and embeddings live in.
///
/// PoincareBall stores its curvature k < 0 and the boundary margin epsilon
/// that caps embeddings at (1 - epsilon)/sqrt(-k). FixedRadiusSphere stores
/// the positive curvature k = 1/r^2 of the sphere of radius r.
class CurvatureSpace {
 public:
  static CurvatureSpace euclidean_squared();
  static CurvatureSpace poincare_ball(double k, double epsilon = 1e-3);
  static CurvatureSpace fixed_radius_sphere(double radius);
  static CurvatureSpace sphere_with_curvature(double k);

  SpaceKind kind() const noexcept { return kind_; }
  double k() const noexcept { return k_; }
  double epsilon() const noexcept { return epsilon_; }

  bool is_poincare() const noexcept { return kind_ == SpaceKind::PoincareBall; }
  bool is_sphere() const noexcept { return kind_ == SpaceKind::FixedRadiusSphere; }

  /// 1/sqrt(-k) for the ball, 1/sqrt(k) for the sphere. Throws DomainError for
  /// the Euclidean space.
  double radius() const;
  /// (1 - epsilon)/sqrt(-k). PoincareBall only.
  double effective_radius() const;
  /// k for the ball, r for the sphere, 0 for Euclidean: the number reported
  /// next to the space name.
  double parameter() const noexcept;

  std::string describe() const;

  bool operator==(const CurvatureSpace&) const = default;

 private:
  CurvatureSpace(SpaceKind kind, double k, double epsilon) : kind_(kind), k_(k), epsilon_(epsilon) {}

  SpaceKind kind_ = SpaceKind::EuclideanSquared;
  double k_ = 0.0;
  double epsilon_ = 0.0;
};

/// Point strictly inside the Poincaré ball of curvature k.
class PoincarePoint {
 public:
  PoincarePoint(Vector coords, double k);
  static PoincarePoint origin(std::size_t dim, double k);

  const Vector& coords() const noexcept { return coords_; }
  double k() const noexcept { return k_; }
  std::size_t dim() const noexcept { return coords_.size(); }
  double squared_norm() const;
  double norm() const;
  PoincarePoint negated() const;

 private:
  struct Unchecked {};
  PoincarePoint(Vector coords, double k, Unchecked) : coords_(std::move(coords)), k_(k) {}
  friend PoincarePoint mobius_add(const PoincarePoint&, const PoincarePoint&);

  Vector coords_;
  double k_;
};

/// Point on the upper sheet of <x,x>_L = 1/k in R^{d,1}; the time-like
/// coordinate is stored last.
class HyperboloidPoint {
 public:
  HyperboloidPoint(Vector coords, double k);
  static HyperboloidPoint apex(std::size_t dim, double k);

  const Vector& coords() const noexcept { return coords_; }
  double k() const noexcept { return k_; }
  /// Intrinsic dimension d (coords has d + 1 entries).
  std::size_t dim() const noexcept { return coords_.size() - 1; }

 private:
  Vector coords_;
  double k_;
};

/// Vector of R^{d,1} tangent to the hyperboloid at `base`.
class TangentVector {
 public:
  TangentVector(HyperboloidPoint base, Vector coords);

  const HyperboloidPoint& base() const noexcept { return base_; }
  const Vector& coords() const noexcept { return coords_; }
  double lorentz_norm() const;

 private:
  HyperboloidPoint base_;
  Vector coords_;
};

double lorentz_inner(std::span<const double> x, std::span<const double> y);

double hyperboloid_distance(const HyperboloidPoint& x, const HyperboloidPoint& y);
HyperboloidPoint hyperboloid_exp(const TangentVector& v);
HyperboloidPoint inclusion(std::span<const double> u, double k);

PoincarePoint stereographic(const HyperboloidPoint& x);
HyperboloidPoint inverse_stereographic(const PoincarePoint& u);

double conformal_factor(const PoincarePoint& u);
PoincarePoint poincare_exp0(std::span<const double> v, double k);
PoincarePoint mobius_add(const PoincarePoint& x, const PoincarePoint& y);
double poincare_distance(const PoincarePoint& x, const PoincarePoint& y);

/// Distance between two ball points of equal Euclidean norm r separated by
/// angle alpha.
double fixed_radius_hyperbolic_distance(double r, double alpha, double k);

struct FixedRadiusCoefficients {
  double a;  // ((1 - k r^2)/(1 + k r^2))^2
  double b;  // 4 k r^2 / (1 + k r^2)^2
};
FixedRadiusCoefficients fixed_radius_coefficients(double r, double k);

double effective_radius(double epsilon, double k);
double clipped_radius(double c, double k);
/// Hyperbolic distance from the origin of a ball point with Euclidean norm r.
double hyperbolic_radius_of(double r_euclidean, double k);
/// Radius of the Euclidean sphere isometric to a hyperbolic sphere of the
/// given hyperbolic radius.
double isometric_sphere_radius(double hyperbolic_radius, double k);
/// isometric_sphere_radius(hyperbolic_radius_of(r, k), k), in closed form
/// 2r / (1 + k r^2).
double boundary_sphere_radius(double r_euclidean, double k);

double spherical_distance(std::span<const double> x, std::span<const double> y, double k);
double chordal_distance(std::span<const double> x, std::span<const double> y);

// Unchecked coordinate-level ball operations for callers that validated their
// inputs once up front.
namespace ball {

void check_inside(std::span<const double> u, double k);
double conformal_factor(std::span<const double> u, double k);
double distance(std::span<const double> x, std::span<const double> y, double k);
/// Gradient of distance(x, y) with respect to x. SingularGradientError when
/// x == y.
void distance_gradient(std::span<const double> x, std::span<const double> y, double k, std::span<double> out);
void exp0(std::span<const double> v, double k, std::span<double> out);
void mobius_add(std::span<const double> x, std::span<const double> y, double k, std::span<double> out);

}  // namespace ball

}  // namespace hyperproto
