#include "hyperproto/concentration.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <queue>

#include "hyperproto/errors.hpp"

namespace hyperproto {

namespace {

constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a, b, value, error;
  bool operator<(const Panel& o) const { return error < o.error; }
};

Panel gauss_kronrod(const std::function<double(double)>& f, double a, double b) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(mid);
  double kronrod = kKronrodWeights[7] * fc;
  double gauss = kGaussWeights[3] * fc;
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kKronrodNodes[j];
    const double pair = f(mid - dx) + f(mid + dx);
    kronrod += kKronrodWeights[j] * pair;
    if (j % 2 == 1) gauss += kGaussWeights[j / 2] * pair;
  }
  return {a, b, kronrod * half, std::abs((kronrod - gauss) * half)};
}

// log(sinh(x)) for x > 0 without overflow.
double log_sinh(double x) {
  if (x > 20.0) return x - std::numbers::ln2 + std::log1p(-std::exp(-2.0 * x));
  return std::log(std::sinh(x));
}

}  // namespace

void validate(const BallSpec& spec) {
  if (spec.d < 1) throw DomainError("ball dimension must be >= 1");
  if (!(spec.k < 0.0) || !std::isfinite(spec.k)) throw DomainError("ball curvature must be negative");
  if (!(spec.r > 0.0) || !std::isfinite(spec.r)) throw DomainError("ball radius must be positive and finite");
}

double gamma_half_integer(int n) {
  if (n < 1) throw DomainError("gamma_half_integer needs n >= 1");
  if (n > 343) return std::exp(std::lgamma(0.5 * n));
  double g;
  int m;
  if (n % 2 == 0) {
    g = 1.0;  // Gamma(1)
    m = 2;
  } else {
    g = std::sqrt(std::numbers::pi);  // Gamma(1/2)
    m = 1;
  }
  for (; m < n; m += 2) g *= 0.5 * m;  // Gamma(z + 1) = z Gamma(z), z = m/2
  return g;
}

double log_gamma_half_integer(int n) {
  if (n < 1) throw DomainError("log_gamma_half_integer needs n >= 1");
  if (n <= 340) return std::log(gamma_half_integer(n));
  return std::lgamma(0.5 * n);
}

double log_sphere_prefactor(int d) {
  return std::numbers::ln2 + 0.5 * d * std::log(std::numbers::pi) - log_gamma_half_integer(d);
}

QuadratureResult integrate_adaptive(const std::function<double(double)>& f, std::span<const double> breakpoints,
                                    double rel_tol, int max_intervals) {
  if (breakpoints.size() < 2) throw DomainError("integration needs at least two breakpoints");
  std::priority_queue<Panel> heap;
  double total = 0.0;
  double error = 0.0;
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
    if (!(breakpoints[i + 1] > breakpoints[i])) throw DomainError("integration breakpoints must be increasing");
    Panel p = gauss_kronrod(f, breakpoints[i], breakpoints[i + 1]);
    total += p.value;
    error += p.error;
    heap.push(p);
  }
  int count = static_cast<int>(heap.size());
  while (error > rel_tol * std::abs(total) && count < max_intervals) {
    const Panel worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    const Panel left = gauss_kronrod(f, worst.a, mid);
    const Panel right = gauss_kronrod(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++count;
  }
  if (!std::isfinite(total) || error > 1e-6 * std::abs(total)) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "quadrature did not converge: value %.6g, error estimate %.3g after %d intervals",
                  total, error, count);
    throw NumericError(buf);
  }
  return {total, error, count};
}

double volume_area_ratio(const BallSpec& spec) {
  validate(spec);
  if (spec.d == 1) return spec.r;
  const double c = std::sqrt(-spec.k);
  const double r = spec.r;
  const double power = spec.d - 1;
  const double log_sinh_r = log_sinh(c * r);
  const double coth_r = 1.0 / std::tanh(c * r);
  // Integrate in s = r - t; the integrand is 1 at s = 0 and decays on a scale
  // of roughly r/d, so the panels are geometric towards s = 0.
  auto integrand = [&](double s) {
    double log_ratio;
    if (s < 0.5 * r) {
      // sinh(c(r-s))/sinh(cr) = cosh(cs) - coth(cr) sinh(cs)
      const double h = std::sinh(0.5 * c * s);
      log_ratio = std::log1p(2.0 * h * h - coth_r * std::sinh(c * s));
    } else {
      log_ratio = log_sinh(c * (r - s)) - log_sinh_r;
    }
    return std::exp(power * log_ratio);
  };
  std::vector<double> breaks{0.0};
  constexpr int kLevels = 50;
  for (int j = kLevels; j >= 1; --j) breaks.push_back(std::ldexp(r, -j));
  breaks.push_back(r);
  return integrate_adaptive(integrand, breaks).value;
}

Measure sphere_area(const BallSpec& spec) {
  validate(spec);
  const double c = std::sqrt(-spec.k);
  const double log_area = log_sphere_prefactor(spec.d) + (spec.d - 1) * (log_sinh(c * spec.r) - std::log(c));
  Measure m{log_area, std::nullopt};
  if (spec.d <= kLinearMeasureMaxDim) m.value = std::exp(log_area);
  return m;
}

Measure ball_volume(const BallSpec& spec) {
  // V = A * (V/A); the scale of the integrand is carried by the area.
  const Measure area = sphere_area(spec);
  const double log_volume = area.log_value + std::log(volume_area_ratio(spec));
  Measure m{log_volume, std::nullopt};
  if (spec.d <= kLinearMeasureMaxDim) m.value = std::exp(log_volume);
  return m;
}

std::vector<ConcentrationRow> concentration_sweep(std::vector<int> d_list, double k, double r) {
  if (d_list.empty()) throw DomainError("concentration sweep needs at least one dimension");
  std::sort(d_list.begin(), d_list.end());
  d_list.erase(std::unique(d_list.begin(), d_list.end()), d_list.end());
  std::vector<ConcentrationRow> rows;
  rows.reserve(d_list.size());
  for (int d : d_list) {
    const BallSpec spec{d, k, r};
    rows.push_back({d, volume_area_ratio(spec), r / d});
  }
  return rows;
}

}  // namespace hyperproto
