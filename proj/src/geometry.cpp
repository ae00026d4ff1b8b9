#include "hyperproto/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "hyperproto/errors.hpp"
#include "hyperproto/kernels.hpp"

namespace hyperproto {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void require_hyperbolic(double k) {
  if (!(k < 0.0) || !std::isfinite(k)) throw DomainError("hyperbolic curvature must be negative, got " + fmt(k));
}

void require_same(std::size_t a, std::size_t b) {
  if (a != b) throw DimensionError("dimension mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
}

void require_same_curvature(double a, double b) {
  if (a != b) throw DomainError("curvature mismatch: " + fmt(a) + " vs " + fmt(b));
}

// acosh(1 + t) for t >= 0 without forming 1 + t.
double acosh1p(double t) { return std::log1p(t + std::sqrt(t * (t + 2.0))); }

}  // namespace

std::string_view to_string(SpaceKind kind) {
  switch (kind) {
    case SpaceKind::EuclideanSquared: return "euclidean";
    case SpaceKind::PoincareBall: return "poincare";
    case SpaceKind::FixedRadiusSphere: return "sphere";
  }
  return "unknown";
}

// --- CurvatureSpace --------------------------------------------------------

CurvatureSpace CurvatureSpace::euclidean_squared() { return {SpaceKind::EuclideanSquared, 0.0, 0.0}; }

CurvatureSpace CurvatureSpace::poincare_ball(double k, double epsilon) {
  require_hyperbolic(k);
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw DomainError("boundary margin epsilon must lie in (0, 1), got " + fmt(epsilon));
  return {SpaceKind::PoincareBall, k, epsilon};
}

CurvatureSpace CurvatureSpace::fixed_radius_sphere(double radius) {
  if (!(radius > 0.0) || !std::isfinite(radius)) throw DomainError("sphere radius must be positive, got " + fmt(radius));
  return {SpaceKind::FixedRadiusSphere, 1.0 / (radius * radius), 0.0};
}

CurvatureSpace CurvatureSpace::sphere_with_curvature(double k) {
  if (!(k > 0.0) || !std::isfinite(k)) throw DomainError("spherical curvature must be positive, got " + fmt(k));
  return {SpaceKind::FixedRadiusSphere, k, 0.0};
}

double CurvatureSpace::radius() const {
  switch (kind_) {
    case SpaceKind::PoincareBall: return 1.0 / std::sqrt(-k_);
    case SpaceKind::FixedRadiusSphere: return 1.0 / std::sqrt(k_);
    case SpaceKind::EuclideanSquared: break;
  }
  throw DomainError("the Euclidean space has no radius");
}

double CurvatureSpace::effective_radius() const {
  if (kind_ != SpaceKind::PoincareBall) throw DomainError("effective radius is defined for the Poincare ball only");
  return hyperproto::effective_radius(epsilon_, k_);
}

double CurvatureSpace::parameter() const noexcept {
  switch (kind_) {
    case SpaceKind::PoincareBall: return k_;
    case SpaceKind::FixedRadiusSphere: return 1.0 / std::sqrt(k_);
    case SpaceKind::EuclideanSquared: break;
  }
  return 0.0;
}

std::string CurvatureSpace::describe() const {
  char buf[96];
  switch (kind_) {
    case SpaceKind::PoincareBall:
      std::snprintf(buf, sizeof buf, "poincare(k=%g,eps=%g)", k_, epsilon_);
      return buf;
    case SpaceKind::FixedRadiusSphere:
      std::snprintf(buf, sizeof buf, "sphere(r=%g)", parameter());
      return buf;
    case SpaceKind::EuclideanSquared: break;
  }
  return "euclidean";
}

// --- points ----------------------------------------------------------------

PoincarePoint::PoincarePoint(Vector coords, double k) : coords_(std::move(coords)), k_(k) {
  require_hyperbolic(k);
  ball::check_inside(coords_, k);
}

PoincarePoint PoincarePoint::origin(std::size_t dim, double k) { return {Vector(dim, 0.0), k}; }

double PoincarePoint::squared_norm() const { return kernels::squared_norm(coords_); }
double PoincarePoint::norm() const { return std::sqrt(squared_norm()); }

PoincarePoint PoincarePoint::negated() const {
  Vector out(coords_);
  for (double& v : out) v = -v;
  return {std::move(out), k_, Unchecked{}};
}

HyperboloidPoint::HyperboloidPoint(Vector coords, double k) : coords_(std::move(coords)), k_(k) {
  require_hyperbolic(k);
  if (coords_.size() < 2) throw DimensionError("hyperboloid points need at least 2 coordinates");
  const double last = coords_.back();
  if (!(last > 0.0)) throw DomainError("hyperboloid point is not on the upper sheet (x_{d+1} = " + fmt(last) + ")");
  const double form = lorentz_inner(coords_, coords_);
  const double scale = std::max(std::abs(1.0 / k), last * last);
  if (!(std::abs(form - 1.0 / k) <= kHyperboloidTolerance * scale)) {
    throw DomainError("point violates <x,x>_L = 1/k: got " + fmt(form) + ", expected " + fmt(1.0 / k));
  }
}

HyperboloidPoint HyperboloidPoint::apex(std::size_t dim, double k) {
  require_hyperbolic(k);
  Vector c(dim + 1, 0.0);
  c.back() = 1.0 / std::sqrt(-k);
  return {std::move(c), k};
}

TangentVector::TangentVector(HyperboloidPoint base, Vector coords) : base_(std::move(base)), coords_(std::move(coords)) {
  require_same(base_.coords().size(), coords_.size());
  const double ip = lorentz_inner(base_.coords(), coords_);
  if (!(std::abs(ip) <= kTangencyTolerance)) throw TangencyError("vector is not tangent: <base, v>_L = " + fmt(ip));
}

double TangentVector::lorentz_norm() const { return std::sqrt(std::max(0.0, lorentz_inner(coords_, coords_))); }

// --- hyperboloid -----------------------------------------------------------

double lorentz_inner(std::span<const double> x, std::span<const double> y) {
  require_same(x.size(), y.size());
  if (x.size() < 2) throw DimensionError("Lorentz inner product needs vectors of length >= 2");
  const std::size_t d = x.size() - 1;
  return kernels::dot(x.first(d), y.first(d)) - x[d] * y[d];
}

double hyperboloid_distance(const HyperboloidPoint& x, const HyperboloidPoint& y) {
  require_same_curvature(x.k(), y.k());
  require_same(x.coords().size(), y.coords().size());
  const double k = x.k();
  const auto& xs = x.coords();
  const auto& ys = y.coords();
  // t = k<x,y>_L - 1. Near 1 use -k/2 <x-y,x-y>_L, which holds on the
  // hyperboloid and avoids the cancellation of forming k<x,y>_L - 1.
  double t = k * lorentz_inner(xs, ys) - 1.0;
  if (t < 1.0) {
    const std::size_t d = xs.size() - 1;
    const double dt = xs[d] - ys[d];
    const double sq = kernels::squared_distance(std::span(xs).first(d), std::span(ys).first(d)) - dt * dt;
    t = -0.5 * k * sq;
  }
  if (t < 0.0) {
    if (t < -kHyperboloidTolerance) throw NumericError("acosh argument below 1: 1 + " + fmt(t));
    t = 0.0;
  }
  return acosh1p(t) / std::sqrt(-k);
}

HyperboloidPoint hyperboloid_exp(const TangentVector& v) {
  const auto& base = v.base();
  const double k = base.k();
  const double theta = v.lorentz_norm() * std::sqrt(-k);
  if (theta == 0.0) return base;
  const double sinhc = theta < 1e-8 ? 1.0 + theta * theta / 6.0 : std::sinh(theta) / theta;
  const double ch = std::cosh(theta);
  Vector out(base.coords().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ch * base.coords()[i] + sinhc * v.coords()[i];
  return {std::move(out), k};
}

HyperboloidPoint inclusion(std::span<const double> u, double k) {
  require_hyperbolic(k);
  Vector out(u.begin(), u.end());
  out.push_back(std::sqrt(kernels::squared_norm(u) - 1.0 / k));
  return {std::move(out), k};
}

PoincarePoint stereographic(const HyperboloidPoint& x) {
  const double k = x.k();
  const auto& c = x.coords();
  const std::size_t d = x.dim();
  const double denom = 1.0 + std::sqrt(-k) * c[d];
  Vector out(d);
  for (std::size_t i = 0; i < d; ++i) out[i] = c[i] / denom;
  return {std::move(out), k};
}

HyperboloidPoint inverse_stereographic(const PoincarePoint& u) {
  const double k = u.k();
  const double kn = k * u.squared_norm();
  const double lambda = 2.0 / (1.0 + kn);
  Vector out(u.dim() + 1);
  for (std::size_t i = 0; i < u.dim(); ++i) out[i] = lambda * u.coords()[i];
  // (lambda - 1) written without the subtraction.
  out.back() = (1.0 - kn) / (1.0 + kn) / std::sqrt(-k);
  return {std::move(out), k};
}

// --- Poincaré ball ---------------------------------------------------------

double conformal_factor(const PoincarePoint& u) { return ball::conformal_factor(u.coords(), u.k()); }

PoincarePoint poincare_exp0(std::span<const double> v, double k) {
  require_hyperbolic(k);
  Vector out(v.size());
  ball::exp0(v, k, out);
  return {std::move(out), k};
}

PoincarePoint mobius_add(const PoincarePoint& x, const PoincarePoint& y) {
  require_same_curvature(x.k(), y.k());
  require_same(x.dim(), y.dim());
  Vector out(x.dim());
  ball::mobius_add(x.coords(), y.coords(), x.k(), out);
  return {std::move(out), x.k(), PoincarePoint::Unchecked{}};
}

double poincare_distance(const PoincarePoint& x, const PoincarePoint& y) {
  require_same_curvature(x.k(), y.k());
  require_same(x.dim(), y.dim());
  return ball::distance(x.coords(), y.coords(), x.k());
}

FixedRadiusCoefficients fixed_radius_coefficients(double r, double k) {
  require_hyperbolic(k);
  const double kr2 = k * r * r;
  const double q = (1.0 - kr2) / (1.0 + kr2);
  return {q * q, 4.0 * kr2 / ((1.0 + kr2) * (1.0 + kr2))};
}

double fixed_radius_hyperbolic_distance(double r, double alpha, double k) {
  require_hyperbolic(k);
  const double radius = 1.0 / std::sqrt(-k);
  if (!(r >= 0.0 && r < radius)) throw DomainError("norm " + fmt(r) + " is outside the ball of radius " + fmt(radius));
  if (alpha < -kClampTolerance || alpha > std::numbers::pi + kClampTolerance || std::isnan(alpha)) {
    throw DomainError("angle must lie in [0, pi], got " + fmt(alpha));
  }
  alpha = std::clamp(alpha, 0.0, std::numbers::pi);
  // a + b cos(alpha) - 1 = -b (1 - cos alpha) = -2 b sin^2(alpha/2), using a + b = 1.
  const double kr2 = k * r * r;
  const double s = std::sin(0.5 * alpha);
  const double t = -8.0 * kr2 * s * s / ((1.0 + kr2) * (1.0 + kr2));
  return acosh1p(t) * radius;
}

double effective_radius(double epsilon, double k) {
  require_hyperbolic(k);
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw DomainError("epsilon must lie in [0, 1), got " + fmt(epsilon));
  return (1.0 - epsilon) / std::sqrt(-k);
}

double clipped_radius(double c, double k) {
  require_hyperbolic(k);
  if (!(c > 0.0)) throw DomainError("clipping magnitude must be positive, got " + fmt(c));
  const double s = std::sqrt(-k);
  return std::tanh(s * c) / s;
}

double hyperbolic_radius_of(double r_euclidean, double k) {
  require_hyperbolic(k);
  const double s = std::sqrt(-k);
  const double radius = 1.0 / s;
  if (!(r_euclidean >= 0.0 && r_euclidean < radius)) {
    throw DomainError("norm " + fmt(r_euclidean) + " is outside the ball of radius " + fmt(radius));
  }
  // log((R + r)/(R - r)) = log1p(2r/(R - r))
  return std::log1p(2.0 * r_euclidean / (radius - r_euclidean)) / s;
}

double isometric_sphere_radius(double hyperbolic_radius, double k) {
  require_hyperbolic(k);
  if (!(hyperbolic_radius >= 0.0)) throw DomainError("hyperbolic radius must be nonnegative");
  const double s = std::sqrt(-k);
  return std::sinh(hyperbolic_radius * s) / s;
}

double boundary_sphere_radius(double r_euclidean, double k) {
  require_hyperbolic(k);
  const double radius = 1.0 / std::sqrt(-k);
  if (!(r_euclidean >= 0.0 && r_euclidean < radius)) {
    throw DomainError("norm " + fmt(r_euclidean) + " is outside the ball of radius " + fmt(radius));
  }
  return 2.0 * r_euclidean / (1.0 + k * r_euclidean * r_euclidean);
}

// --- spherical / Euclidean ---------------------------------------------------

double spherical_distance(std::span<const double> x, std::span<const double> y, double k) {
  if (!(k > 0.0)) throw DomainError("spherical curvature must be positive, got " + fmt(k));
  require_same(x.size(), y.size());
  const double radius = 1.0 / std::sqrt(k);
  const double tol = 1e-9 * std::max(1.0, radius);
  for (auto p : {x, y}) {
    const double n = std::sqrt(kernels::squared_norm(p));
    if (!(std::abs(n - radius) <= tol)) throw DomainError("point of norm " + fmt(n) + " is not on the sphere of radius " + fmt(radius));
  }
  double c = k * kernels::dot(x, y);
  if (c > 1.0 + kClampTolerance || c < -1.0 - kClampTolerance) throw NumericError("acos argument out of range: " + fmt(c));
  c = std::clamp(c, -1.0, 1.0);
  return std::acos(c) * radius;
}

double chordal_distance(std::span<const double> x, std::span<const double> y) {
  return std::sqrt(kernels::squared_distance(x, y));
}

// --- unchecked ball kernels -----------------------------------------------------

namespace ball {

void check_inside(std::span<const double> u, double k) {
  const double n2 = kernels::squared_norm(u);
  if (!(n2 < -1.0 / k)) {
    throw DomainError("point of norm " + fmt(std::sqrt(n2)) + " is outside the ball of radius " + fmt(1.0 / std::sqrt(-k)));
  }
}

double conformal_factor(std::span<const double> u, double k) { return 2.0 / (1.0 + k * kernels::squared_norm(u)); }

double distance(std::span<const double> x, std::span<const double> y, double k) {
  // With c = sqrt(-k): c||-x (+) y|| = sqrt(q/(1+q)), q = c^2||x-y||^2 / ((1-c^2||x||^2)(1-c^2||y||^2)),
  // so (2/c) atanh(c||-x (+) y||) = (2/c) asinh(sqrt(q)).
  const double bx = 1.0 + k * kernels::squared_norm(x);
  const double by = 1.0 + k * kernels::squared_norm(y);
  if (!(bx > 0.0 && by > 0.0)) throw NumericError("atanh argument reached 1: point on or outside the ball boundary");
  const double q = -k * kernels::squared_distance(x, y) / (bx * by);
  return 2.0 * std::asinh(std::sqrt(q)) / std::sqrt(-k);
}

void distance_gradient(std::span<const double> x, std::span<const double> y, double k, std::span<double> out) {
  // d = acosh(1 + t)/c with t = 2c^2||x-y||^2 / (bx by), bx = 1 - c^2||x||^2.
  // dt/dx = 4c^2/(bx by) [ (x - y) + (c^2||x-y||^2 / bx) x ].
  const double c2 = -k;
  const double bx = 1.0 + k * kernels::squared_norm(x);
  const double by = 1.0 + k * kernels::squared_norm(y);
  if (!(bx > 0.0 && by > 0.0)) throw NumericError("distance gradient evaluated on or outside the ball boundary");
  const double delta = c2 * kernels::squared_distance(x, y);
  const double t = 2.0 * delta / (bx * by);
  if (!(t > 0.0)) throw SingularGradientError("distance gradient is singular at coincident points");
  const double outer = 4.0 * c2 / (bx * by) / (std::sqrt(c2) * std::sqrt(t * (t + 2.0)));
  const double radial = delta / bx;
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = outer * ((x[i] - y[i]) + radial * x[i]);
}

void exp0(std::span<const double> v, double k, std::span<double> out) {
  const double s = std::sqrt(-k);
  const double n = std::sqrt(kernels::squared_norm(v));
  const double arg = s * n;
  double factor;
  if (arg == 0.0) {
    factor = 0.0;
  } else if (arg < 1e-8) {
    factor = 1.0;
  } else {
    factor = std::min(std::tanh(arg), 1.0 - kBallMargin) / arg;
  }
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = factor * v[i];
}

void mobius_add(std::span<const double> x, std::span<const double> y, double k, std::span<double> out) {
  const double xy = kernels::dot(x, y);
  const double x2 = kernels::squared_norm(x);
  const double y2 = kernels::squared_norm(y);
  const double cx = 1.0 - 2.0 * k * xy - k * y2;
  const double cy = 1.0 + k * x2;
  const double den = 1.0 - 2.0 * k * xy + k * k * x2 * y2;
  if (!(std::abs(den) >= 1e-15)) throw NumericError("Mobius addition denominator vanished: " + fmt(den));
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (cx * x[i] + cy * y[i]) / den;
  const double limit = (1.0 - kBallMargin) / std::sqrt(-k);
  const double n = std::sqrt(kernels::squared_norm(out));
  if (n > limit) kernels::scale(limit / n, out);
}

}  // namespace ball

}  // namespace hyperproto
