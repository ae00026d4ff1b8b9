#include "hyperproto/verify.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>

#include "hyperproto/concentration.hpp"
#include "hyperproto/errors.hpp"
#include "hyperproto/geometry.hpp"
#include "hyperproto/hierarchy.hpp"
#include "hyperproto/kernels.hpp"
#include "hyperproto/protoloss.hpp"

namespace hyperproto {

namespace {

constexpr std::size_t kMaxSamples = 5;
constexpr std::array kCurvatures = {-0.005, -0.05, -1.0};

class Suite {
 public:
  Suite(std::string name, double scale) : scale_(scale) { result_.name = std::move(name); }

  double tol(double t) const { return t * scale_; }

  void check(bool ok, const std::function<std::string()>& describe) {
    ++result_.checks;
    if (ok) return;
    ++result_.failures;
    if (result_.failure_samples.size() < kMaxSamples) result_.failure_samples.push_back(describe());
  }

  SuiteResult& result() { return result_; }

 private:
  double scale_;
  SuiteResult result_;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string vec(std::span<const double> v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size() && i < 4; ++i) s += (i ? "," : "") + num(v[i]);
  if (v.size() > 4) s += ",...";
  return s + ")";
}

Vector gaussian(Rng& rng, std::size_t n, double sd = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  Vector v(n);
  for (double& x : v) x = g(rng);
  return v;
}

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

// Ball point at hyperbolic distance rho from the origin in a random direction.
Vector ball_point(Rng& rng, std::size_t d, double k, double rho) {
  Vector v = gaussian(rng, d);
  const double n = std::sqrt(kernels::squared_norm(v));
  const double c = std::sqrt(-k);
  kernels::scale(std::tanh(c * rho / 2.0) / (c * n), v);
  return v;
}

Vector random_ball_point(Rng& rng, std::size_t d, double k, double max_scaled_radius = 4.0) {
  return ball_point(rng, d, k, uniform(rng, 0.0, max_scaled_radius) / std::sqrt(-k));
}

template <class Body>
SuiteResult timed(const std::string& name, double scale, Body body) {
  const auto start = std::chrono::steady_clock::now();
  Suite s(name, scale);
  try {
    body(s);
  } catch (const std::exception& e) {
    s.check(false, [&] { return std::string("unexpected exception: ") + e.what(); });
  }
  s.result().seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return s.result();
}

void isometry(Suite& s, Rng& rng) {
  for (const std::size_t d : {1UL, 2UL, 8UL, 64UL}) {
    for (const double k : kCurvatures) {
      for (int i = 0; i < 10000; ++i) {
        const PoincarePoint x(random_ball_point(rng, d, k), k);
        const PoincarePoint y(random_ball_point(rng, d, k), k);
        const double dh = hyperboloid_distance(inverse_stereographic(x), inverse_stereographic(y));
        const double dp = poincare_distance(x, y);
        s.check(std::abs(dh - dp) <= s.tol(1e-8), [&] {
          return "d=" + std::to_string(d) + " k=" + num(k) + " x=" + vec(x.coords()) + " y=" + vec(y.coords()) +
                 " hyperboloid=" + num(dh) + " poincare=" + num(dp);
        });
      }
    }
  }
}

void round_trip(Suite& s, Rng& rng) {
  for (const std::size_t d : {1UL, 3UL, 16UL}) {
    for (const double k : kCurvatures) {
      for (int i = 0; i < 1000; ++i) {
        const PoincarePoint u(random_ball_point(rng, d, k), k);
        const HyperboloidPoint x = inverse_stereographic(u);
        const PoincarePoint back = stereographic(x);
        const HyperboloidPoint again = inverse_stereographic(back);
        double err_ball = 0.0;
        double err_hyp = 0.0;
        for (std::size_t j = 0; j < d; ++j) err_ball = std::max(err_ball, std::abs(back.coords()[j] - u.coords()[j]));
        for (std::size_t j = 0; j <= d; ++j) {
          err_hyp = std::max(err_hyp, std::abs(again.coords()[j] - x.coords()[j]));
        }
        s.check(err_ball <= s.tol(1e-10) && err_hyp <= s.tol(1e-10), [&] {
          return "k=" + num(k) + " u=" + vec(u.coords()) + " ball error=" + num(err_ball) +
                 " hyperboloid error=" + num(err_hyp);
        });
      }
    }
  }
}

void fixed_radius(Suite& s, Rng& rng) {
  for (int i = 0; i < 10000; ++i) {
    const double k = kCurvatures[i % kCurvatures.size()];
    const std::size_t d = 2 + static_cast<std::size_t>(i % 7);
    const double big_r = 1.0 / std::sqrt(-k);
    const double r = uniform(rng, 0.0, 0.99) * big_r;
    // Orthonormal pair by Gram-Schmidt.
    Vector e1 = gaussian(rng, d);
    kernels::scale(1.0 / std::sqrt(kernels::squared_norm(e1)), e1);
    Vector e2 = gaussian(rng, d);
    kernels::axpy(-kernels::dot(e1, e2), e1, e2);
    kernels::scale(1.0 / std::sqrt(kernels::squared_norm(e2)), e2);
    const double alpha = uniform(rng, 0.0, std::numbers::pi);
    Vector x(d), y(d);
    for (std::size_t j = 0; j < d; ++j) {
      x[j] = r * e1[j];
      y[j] = r * (std::cos(alpha) * e1[j] + std::sin(alpha) * e2[j]);
    }
    const double direct = poincare_distance(PoincarePoint(x, k), PoincarePoint(y, k));
    const double formula = fixed_radius_hyperbolic_distance(r, alpha, k);
    s.check(std::abs(direct - formula) <= s.tol(1e-8), [&] {
      return "k=" + num(k) + " r=" + num(r) + " alpha=" + num(alpha) + " pair=" + num(direct) +
             " formula=" + num(formula);
    });
  }
}

void mobius_laws(Suite& s, Rng& rng) {
  for (int i = 0; i < 3000; ++i) {
    const double k = kCurvatures[i % kCurvatures.size()];
    const std::size_t d = 1 + static_cast<std::size_t>(i % 8);
    const PoincarePoint x(random_ball_point(rng, d, k), k);
    const PoincarePoint y(random_ball_point(rng, d, k), k);
    const double big_r = 1.0 / std::sqrt(-k);
    const PoincarePoint right_id = mobius_add(x, PoincarePoint::origin(d, k));
    const PoincarePoint inverse = mobius_add(x.negated(), x);
    const PoincarePoint sum = mobius_add(x, y);
    double id_err = 0.0;
    for (std::size_t j = 0; j < d; ++j) id_err = std::max(id_err, std::abs(right_id.coords()[j] - x.coords()[j]));
    s.check(id_err <= s.tol(1e-12) * big_r, [&] { return "x (+) 0 != x for x=" + vec(x.coords()); });
    s.check(inverse.norm() <= s.tol(1e-10) * big_r, [&] {
      return "(-x) (+) x = " + vec(inverse.coords()) + " for x=" + vec(x.coords());
    });
    s.check(sum.norm() < big_r, [&] { return "x (+) y left the ball for x=" + vec(x.coords()); });
  }
}

void triangle(Suite& s, Rng& rng) {
  for (int i = 0; i < 5000; ++i) {
    const double k = kCurvatures[i % kCurvatures.size()];
    const std::size_t d = 1 + static_cast<std::size_t>(i % 8);
    const PoincarePoint x(random_ball_point(rng, d, k), k);
    const PoincarePoint y(random_ball_point(rng, d, k), k);
    const PoincarePoint z(random_ball_point(rng, d, k), k);
    const double slack = poincare_distance(x, z) + poincare_distance(z, y) - poincare_distance(x, y);
    s.check(slack >= -s.tol(1e-9), [&] { return "triangle slack " + num(slack) + " at x=" + vec(x.coords()); });
    const double self = poincare_distance(x, x);
    s.check(self <= s.tol(1e-10), [&] { return "d(x,x)=" + num(self); });
  }
}

void exp_map_norm(Suite& s, Rng& rng) {
  for (int i = 0; i < 5000; ++i) {
    const double k = kCurvatures[i % kCurvatures.size()];
    const double c = std::sqrt(-k);
    const std::size_t d = 1 + static_cast<std::size_t>(i % 16);
    Vector v = gaussian(rng, d);
    const double target = uniform(rng, 0.0, 3.0) / c;
    kernels::scale(target / std::sqrt(kernels::squared_norm(v)), v);
    const double n = std::sqrt(kernels::squared_norm(v));
    const PoincarePoint p = poincare_exp0(v, k);
    const double law = std::tanh(c * n) / c;
    s.check(std::abs(p.norm() - law) <= s.tol(1e-12) * (1.0 / c), [&] {
      return "|Exp0(v)|=" + num(p.norm()) + " expected " + num(law);
    });
    const double rho = hyperbolic_radius_of(p.norm(), k);
    s.check(std::abs(rho - 2.0 * n) <= s.tol(1e-8) * std::max(1.0, 2.0 * n), [&] {
      return "hyperbolic radius " + num(rho) + " vs 2|v|=" + num(2.0 * n) + " k=" + num(k);
    });
  }
}

void concentration_bound(Suite& s, Rng&) {
  for (const double k : kCurvatures) {
    for (const double r : {0.5, 1.0, 2.0, 5.0}) {
      for (int d = 1; d <= 1024; d *= 2) {
        const double ratio = volume_area_ratio({d, k, r});
        s.check(ratio > 0.0 && ratio <= r / d + s.tol(1e-12), [&] {
          return "d=" + std::to_string(d) + " k=" + num(k) + " r=" + num(r) + " ratio=" + num(ratio) +
                 " bound=" + num(r / d);
        });
      }
    }
  }
  const double v = volume_area_ratio({2, -1.0, 1.0});
  s.check(std::abs(v - std::tanh(0.5)) <= s.tol(1e-8), [&] { return "d=2 ratio " + num(v) + " vs tanh(1/2)"; });
}

// Loss evaluated without point validation so that finite differences may
// leave the sphere.
double raw_loss(const CurvatureSpace& space, const Matrix& protos, const Matrix& queries, std::span<const int> labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < queries.rows(); ++i) {
    Vector d(protos.rows());
    double lo = INFINITY;
    for (std::size_t j = 0; j < protos.rows(); ++j) {
      d[j] = space_distance(space, protos.row(j), queries.row(i));
      lo = std::min(lo, d[j]);
    }
    double acc = 0.0;
    for (double v : d) acc += std::exp(lo - v);
    total += d[labels[i]] - lo + std::log(acc);
  }
  return total;
}

struct GradientInstance {
  CurvatureSpace space;
  Matrix protos;
  Matrix queries;
  std::vector<int> labels;
};

GradientInstance random_instance(SpaceKind kind, Rng& rng) {
  const std::size_t d = kind == SpaceKind::PoincareBall ? 8 : 2 + rng() % 7;
  const std::size_t classes = 2 + rng() % 4;
  const std::size_t n_queries = 1 + rng() % 4;
  GradientInstance inst{CurvatureSpace::euclidean_squared(), Matrix(), Matrix(), {}};
  auto point = [&]() -> Vector {
    switch (kind) {
      case SpaceKind::EuclideanSquared: return gaussian(rng, d);
      case SpaceKind::PoincareBall: return random_ball_point(rng, d, -0.05, 3.0);
      case SpaceKind::FixedRadiusSphere: return fixed_radius_rescale(gaussian(rng, d), inst.space.radius());
    }
    return {};
  };
  if (kind == SpaceKind::PoincareBall) inst.space = CurvatureSpace::poincare_ball(-0.05);
  if (kind == SpaceKind::FixedRadiusSphere) inst.space = CurvatureSpace::fixed_radius_sphere(uniform(rng, 0.5, 5.0));
  for (std::size_t j = 0; j < classes; ++j) inst.protos.push_row(point());
  for (std::size_t i = 0; i < n_queries; ++i) {
    inst.queries.push_row(point());
    inst.labels.push_back(static_cast<int>(rng() % classes));
  }
  return inst;
}

void loss_gradients(Suite& s, Rng& rng) {
  for (const auto kind : {SpaceKind::EuclideanSquared, SpaceKind::PoincareBall, SpaceKind::FixedRadiusSphere}) {
    const double tolerance = kind == SpaceKind::EuclideanSquared ? 1e-5 : 1e-4;
    for (int n = 0; n < 100; ++n) {
      GradientInstance inst = random_instance(kind, rng);
      const PrototypeSet protos(inst.protos, inst.space);
      const Matrix analytic = loss_gradient(protos, inst.queries, inst.labels, GradientMode::EuclideanBackprop);
      Matrix fd(inst.queries.rows(), inst.queries.cols());
      const double h = 1e-5;
      for (std::size_t i = 0; i < inst.queries.rows(); ++i) {
        for (std::size_t j = 0; j < inst.queries.cols(); ++j) {
          const double keep = inst.queries(i, j);
          inst.queries(i, j) = keep + h;
          const double up = raw_loss(inst.space, inst.protos, inst.queries, inst.labels);
          inst.queries(i, j) = keep - h;
          const double down = raw_loss(inst.space, inst.protos, inst.queries, inst.labels);
          inst.queries(i, j) = keep;
          fd(i, j) = (up - down) / (2.0 * h);
        }
      }
      const double diff = std::sqrt(kernels::squared_distance(analytic.data(), fd.data()));
      const double ref = std::max(std::sqrt(kernels::squared_norm(fd.data())), 1e-12);
      s.check(diff / ref <= s.tol(tolerance), [&] {
        return std::string(to_string(kind)) + " relative gradient error " + num(diff / ref) + " query0=" +
               vec(inst.queries.row(0));
      });
    }
  }
}

void riemannian_scaling(Suite& s, Rng& rng) {
  for (int n = 0; n < 200; ++n) {
    const GradientInstance inst = random_instance(SpaceKind::PoincareBall, rng);
    const PrototypeSet protos(inst.protos, inst.space);
    const Matrix e = loss_gradient(protos, inst.queries, inst.labels, GradientMode::EuclideanBackprop);
    const Matrix r = loss_gradient(protos, inst.queries, inst.labels, GradientMode::RiemannianScaled);
    bool exact = true;
    for (std::size_t i = 0; i < e.rows(); ++i) {
      const double lambda = ball::conformal_factor(inst.queries.row(i), inst.space.k());
      const double scale = 1.0 / (lambda * lambda);
      for (std::size_t j = 0; j < e.cols(); ++j) exact = exact && r(i, j) == e(i, j) * scale;
    }
    s.check(exact, [&] { return "riemannian gradient differs from lambda^-2 times the euclidean gradient"; });
  }
}

void probabilities(Suite& s, Rng& rng) {
  for (int n = 0; n < 2000; ++n) {
    const auto kind = static_cast<SpaceKind>(n % 3);
    const GradientInstance inst = random_instance(kind, rng);
    const PrototypeSet protos(inst.protos, inst.space);
    const Vector p = class_probabilities(protos, inst.queries.row(0));
    double sum = 0.0;
    for (double v : p) sum += v;
    s.check(std::abs(sum - 1.0) <= s.tol(1e-12), [&] { return "probabilities sum to " + num(sum); });
    const double loss = prototypical_loss(protos, inst.queries, inst.labels);
    double nll = 0.0;
    for (std::size_t i = 0; i < inst.queries.rows(); ++i) {
      nll -= std::log(class_probabilities(protos, inst.queries.row(i))[inst.labels[i]]);
    }
    s.check(std::abs(loss - nll) <= s.tol(1e-12) * std::max(1.0, std::abs(nll)),
            [&] { return "loss " + num(loss) + " vs summed negative log probability " + num(nll); });
  }
}

void einstein_betweenness(Suite& s, Rng& rng) {
  for (int n = 0; n < 1000; ++n) {
    const double k = kCurvatures[n % kCurvatures.size()];
    const std::size_t d = 1 + static_cast<std::size_t>(n % 16);
    Matrix pair;
    pair.push_row(random_ball_point(rng, d, k));
    pair.push_row(random_ball_point(rng, d, k));
    const Vector m = einstein_midpoint(pair, k);
    const double dxm = ball::distance(pair.row(0), m, k);
    const double dmy = ball::distance(m, pair.row(1), k);
    const double dxy = ball::distance(pair.row(0), pair.row(1), k);
    s.check(std::abs(dxm + dmy - dxy) <= s.tol(1e-6), [&] {
      return "k=" + num(k) + " d(x,m)+d(m,y)-d(x,y)=" + num(dxm + dmy - dxy) + " x=" + vec(pair.row(0));
    });
  }
}

struct NamedSuite {
  const char* name;
  void (*body)(Suite&, Rng&);
};

constexpr std::array kSuites = {
    NamedSuite{"isometry", isometry},
    NamedSuite{"round_trip", round_trip},
    NamedSuite{"fixed_radius_distance", fixed_radius},
    NamedSuite{"mobius_laws", mobius_laws},
    NamedSuite{"triangle_inequality", triangle},
    NamedSuite{"exp_map_norm", exp_map_norm},
    NamedSuite{"concentration_bound", concentration_bound},
    NamedSuite{"loss_gradients", loss_gradients},
    NamedSuite{"riemannian_scaling", riemannian_scaling},
    NamedSuite{"probabilities", probabilities},
    NamedSuite{"einstein_betweenness", einstein_betweenness},
};

}  // namespace

std::vector<std::string> verification_suite_names() {
  std::vector<std::string> names;
  for (const auto& s : kSuites) names.emplace_back(s.name);
  return names;
}

std::vector<SuiteResult> run_verification(const VerifyOptions& options) {
  std::vector<SuiteResult> results;
  for (std::size_t i = 0; i < kSuites.size(); ++i) {
    Rng rng(derive_seed(options.seed, 0x766572ULL, i));
    results.push_back(timed(kSuites[i].name, options.tolerance_scale, [&](Suite& s) { kSuites[i].body(s, rng); }));
  }
  return results;
}

}  // namespace hyperproto
