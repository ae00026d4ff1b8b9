#pragma once

// Volume and boundary area of hyperbolic balls and the ratio V/A, which is
// bounded by r/d and therefore vanishes as the dimension grows.

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace hyperproto {

/// Hyperbolic ball of hyperbolic radius r in dimension d, curvature k < 0.
struct BallSpec {
  int d = 1;
  double k = -1.0;
  double r = 1.0;
};

/// Throws DomainError unless d >= 1, k < 0 and 0 < r < inf.
void validate(const BallSpec& spec);

/// Gamma(n/2) for n >= 1. Exact recurrence from Gamma(1/2) and Gamma(1);
/// overflows to +inf past n = 343, use log_gamma_half_integer there.
double gamma_half_integer(int n);
double log_gamma_half_integer(int n);
/// log(2 pi^{d/2} / Gamma(d/2)), the area of the unit (d-1)-sphere.
double log_sphere_prefactor(int d);

/// Dimensions above this report volumes and areas in log space only.
inline constexpr int kLinearMeasureMaxDim = 300;

struct Measure {
  double log_value;
  /// exp(log_value); empty when d > kLinearMeasureMaxDim.
  std::optional<double> value;
};

Measure ball_volume(const BallSpec& spec);
Measure sphere_area(const BallSpec& spec);

/// V_k(r)/A_k(r) = int_0^r (sinh(sqrt(-k) t)/sinh(sqrt(-k) r))^{d-1} dt,
/// integrated directly (never as a quotient).
double volume_area_ratio(const BallSpec& spec);

struct ConcentrationRow {
  int d;
  double ratio;
  double bound;  // r/d
};

/// One row per distinct d, ascending.
std::vector<ConcentrationRow> concentration_sweep(std::vector<int> d_list, double k, double r);

struct QuadratureResult {
  double value;
  double abs_error;
  int intervals;
};

/// Globally adaptive Gauss-Kronrod (7/15) integration over the panels given by
/// consecutive `breakpoints`. Stops when the summed error estimate is below
/// rel_tol * |value|; past `max_intervals` it accepts results within 1e-6
/// relative and throws NumericError otherwise.
QuadratureResult integrate_adaptive(const std::function<double(double)>& f, std::span<const double> breakpoints,
                                    double rel_tol = 1e-10, int max_intervals = 4000);

}  // namespace hyperproto
