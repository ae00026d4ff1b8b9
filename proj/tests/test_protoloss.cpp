#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "hyperproto/errors.hpp"
#include "hyperproto/geometry.hpp"
#include "hyperproto/protoloss.hpp"

using namespace hyperproto;

namespace {

std::mt19937_64& rng() {
  static std::mt19937_64 r(11);
  return r;
}

Vector gaussian(std::size_t n, double sd = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  Vector v(n);
  for (double& x : v) x = g(rng());
  return v;
}

Vector ball_point(std::size_t d, double k, double max_fraction = 0.9) {
  Vector v = gaussian(d);
  double n = 0;
  for (double x : v) n += x * x;
  const double f = std::uniform_real_distribution<double>(0.0, max_fraction)(rng());
  for (double& x : v) x *= f / std::sqrt(-k * n);
  return v;
}

double norm(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Central differences of a scalar function of a matrix.
Matrix numeric_gradient(const std::function<double(const Matrix&)>& f, Matrix at, double h = 1e-5) {
  Matrix g(at.rows(), at.cols());
  for (std::size_t i = 0; i < at.rows(); ++i) {
    for (std::size_t j = 0; j < at.cols(); ++j) {
      const double keep = at(i, j);
      at(i, j) = keep + h;
      const double up = f(at);
      at(i, j) = keep - h;
      const double down = f(at);
      at(i, j) = keep;
      g(i, j) = (up - down) / (2 * h);
    }
  }
  return g;
}

double relative_error(const Matrix& a, const Matrix& b) {
  double diff = 0, ref = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    diff += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
    ref += b.data()[i] * b.data()[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(ref), 1e-300);
}

// Loss written out directly from the definition, without validation.
double reference_loss(const CurvatureSpace& space, const Matrix& protos, const Matrix& queries,
                      const std::vector<int>& labels) {
  double total = 0;
  for (std::size_t i = 0; i < queries.rows(); ++i) {
    double z = 0;
    for (std::size_t j = 0; j < protos.rows(); ++j) z += std::exp(-space_distance(space, protos.row(j), queries.row(i)));
    total += space_distance(space, protos.row(labels[i]), queries.row(i)) + std::log(z);
  }
  return total;
}

}  // namespace

TEST_CASE("space distance dispatch") {
  CHECK(space_distance(CurvatureSpace::euclidean_squared(), Vector{1, 0}, Vector{0, 1}) == 2.0);
  CHECK(space_distance(CurvatureSpace::poincare_ball(-1), Vector{0.5, 0}, Vector{0, 0.5}) ==
        doctest::Approx(1.6806997724280036).epsilon(1e-12));
  CHECK(space_distance(CurvatureSpace::fixed_radius_sphere(10), Vector{10, 0}, Vector{0, 10}) ==
        doctest::Approx(10 * std::sqrt(2.0)));
  CHECK_THROWS_AS(check_point(CurvatureSpace::poincare_ball(-1), Vector{1.0, 0.0}), DomainError);
  CHECK_THROWS_AS(check_point(CurvatureSpace::fixed_radius_sphere(2), Vector{1.0, 0.0}), DomainError);
}

TEST_CASE("class probabilities") {
  const auto e = CurvatureSpace::euclidean_squared();
  const PrototypeSet two(Matrix::from_rows({{1, 0}, {-1, 0}}), e);
  const auto half = class_probabilities(two, Vector{0, 3});
  CHECK(half[0] == doctest::Approx(0.5));
  CHECK(half[1] == doctest::Approx(0.5));
  // Squared distances 0, 1, 2 from the origin-based prototypes.
  const PrototypeSet three(Matrix::from_rows({{0, 0}, {1, 0}, {1, 1}}), e);
  const auto p = class_probabilities(three, Vector{0, 0});
  CHECK(p[0] == doctest::Approx(0.66524).epsilon(1e-5));
  CHECK(p[1] == doctest::Approx(0.24473).epsilon(1e-4));
  CHECK(p[2] == doctest::Approx(0.09003).epsilon(1e-4));
  CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0).epsilon(1e-15));
  const PrototypeSet far(Matrix::from_rows({{0, 0}, {100, 0}}), e);
  CHECK(class_probabilities(far, Vector{0, 0})[0] == doctest::Approx(1.0));
  CHECK(predict_class(two, Vector{0, 0}) == 0);
  CHECK(predict_class(two, Vector{-0.1, 0}) == 1);
}

TEST_CASE("prototypical loss") {
  const auto e = CurvatureSpace::euclidean_squared();
  const double big_d = 3.0;
  const PrototypeSet protos(Matrix::from_rows({{0, 0}, {std::sqrt(big_d), 0}}), e);
  const Matrix q = Matrix::from_rows({{0, 0}});
  const std::vector<int> label{0};
  CHECK(prototypical_loss(protos, q, label) == doctest::Approx(std::log1p(std::exp(-big_d))).epsilon(1e-14));

  // Relabeling invariance.
  const auto ball = CurvatureSpace::poincare_ball(-0.05);
  Matrix w, x;
  for (int i = 0; i < 4; ++i) w.push_row(ball_point(6, -0.05));
  for (int i = 0; i < 5; ++i) x.push_row(ball_point(6, -0.05));
  const std::vector<int> labels{0, 1, 2, 3, 1};
  const double base = prototypical_loss(PrototypeSet(w, ball), x, labels);
  const std::vector<int> perm{2, 0, 3, 1};
  Matrix w_perm(4, 6);
  for (int c = 0; c < 4; ++c) std::copy(w.row(c).begin(), w.row(c).end(), w_perm.row(perm[c]).begin());
  std::vector<int> labels_perm;
  for (int l : labels) labels_perm.push_back(perm[l]);
  CHECK(prototypical_loss(PrototypeSet(w_perm, ball), x, labels_perm) == doctest::Approx(base).epsilon(1e-14));
  CHECK(base == doctest::Approx(reference_loss(ball, w, x, labels)).epsilon(1e-12));

  CHECK_THROWS_AS(prototypical_loss(PrototypeSet(w, ball), x, std::vector<int>{0, 1}), DimensionError);
  CHECK_THROWS_AS(prototypical_loss(PrototypeSet(w, ball), x, std::vector<int>{0, 1, 2, 4, 0}), DomainError);
  CHECK_THROWS_AS(PrototypeSet(Matrix::from_rows({{5.0, 0.0}}), ball), DomainError);
}

TEST_CASE("aligned configuration loss decreases toward the boundary") {
  const double k = -1;
  const auto ball = CurvatureSpace::poincare_ball(k, 1e-9);
  auto loss_at = [&](double r) {
    Matrix w = Matrix::from_rows({{r, 0}, {-r, 0}});
    Matrix x = Matrix::from_rows({{r, 0}, {-r, 0}});
    return prototypical_loss(PrototypeSet(w, ball), x, std::vector<int>{0, 1});
  };
  double prev = loss_at(0.1);
  for (double r = 0.15; r <= 0.99; r += 0.05) {
    const double cur = loss_at(r);
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("loss gradients match finite differences") {
  SUBCASE("euclidean") {
    const auto e = CurvatureSpace::euclidean_squared();
    for (int n = 0; n < 50; ++n) {
      Matrix w, x;
      for (int i = 0; i < 3; ++i) w.push_row(gaussian(5));
      for (int i = 0; i < 4; ++i) x.push_row(gaussian(5));
      const std::vector<int> labels{0, 2, 1, 2};
      const PrototypeSet protos(w, e);
      const auto g = loss_and_gradients(protos, x, labels);
      const auto fx = numeric_gradient([&](const Matrix& m) { return reference_loss(e, w, m, labels); }, x);
      const auto fw = numeric_gradient([&](const Matrix& m) { return reference_loss(e, m, x, labels); }, w);
      CHECK(relative_error(g.queries, fx) < 1e-5);
      CHECK(relative_error(g.prototypes, fw) < 1e-5);
    }
  }
  SUBCASE("poincare") {
    const auto ball = CurvatureSpace::poincare_ball(-0.05);
    for (int n = 0; n < 50; ++n) {
      Matrix w, x;
      for (int i = 0; i < 3; ++i) w.push_row(ball_point(8, -0.05));
      for (int i = 0; i < 4; ++i) x.push_row(ball_point(8, -0.05));
      const std::vector<int> labels{1, 0, 2, 2};
      const PrototypeSet protos(w, ball);
      const auto g = loss_and_gradients(protos, x, labels);
      const auto fx = numeric_gradient([&](const Matrix& m) { return reference_loss(ball, w, m, labels); }, x);
      const auto fw = numeric_gradient([&](const Matrix& m) { return reference_loss(ball, m, x, labels); }, w);
      CHECK(relative_error(g.queries, fx) < 1e-4);
      CHECK(relative_error(g.prototypes, fw) < 1e-4);

      const Matrix riem = loss_gradient(protos, x, labels, GradientMode::RiemannianScaled);
      for (std::size_t i = 0; i < x.rows(); ++i) {
        const double lam = conformal_factor(PoincarePoint(to_vector(x.row(i)), -0.05));
        for (std::size_t j = 0; j < x.cols(); ++j) CHECK(riem(i, j) == g.queries(i, j) * (1.0 / (lam * lam)));
      }
    }
  }
  SUBCASE("sphere") {
    const auto sphere = CurvatureSpace::fixed_radius_sphere(3.0);
    for (int n = 0; n < 50; ++n) {
      Matrix w, x;
      for (int i = 0; i < 3; ++i) w.push_row(fixed_radius_rescale(gaussian(4), 3.0));
      for (int i = 0; i < 2; ++i) x.push_row(fixed_radius_rescale(gaussian(4), 3.0));
      const std::vector<int> labels{2, 0};
      const PrototypeSet protos(w, sphere);
      const auto g = loss_and_gradients(protos, x, labels);
      const auto fx = numeric_gradient([&](const Matrix& m) { return reference_loss(sphere, w, m, labels); }, x);
      CHECK(relative_error(g.queries, fx) < 1e-4);
    }
    const PrototypeSet protos(Matrix::from_rows({{0, 3, 0, 0}, {0, 0, 3, 0}}), sphere);
    CHECK_THROWS_AS(loss_gradient(protos, Matrix::from_rows({{3, 0, 0, 0}}), std::vector<int>{0},
                                  GradientMode::RiemannianScaled),
                    DomainError);
  }
}

TEST_CASE("singular gradient at coincident points") {
  const auto ball = CurvatureSpace::poincare_ball(-1);
  const PrototypeSet protos(Matrix::from_rows({{0.2, 0.1}, {-0.3, 0.0}}), ball);
  CHECK_THROWS_AS(loss_gradient(protos, Matrix::from_rows({{0.2, 0.1}}), std::vector<int>{0},
                                GradientMode::EuclideanBackprop),
                  SingularGradientError);
}

TEST_CASE("bisector gradient points toward the true class") {
  const auto ball = CurvatureSpace::poincare_ball(-1);
  const PrototypeSet protos(Matrix::from_rows({{0.5, 0.0}, {-0.5, 0.0}}), ball);
  const Matrix g = loss_gradient(protos, Matrix::from_rows({{0.0, 0.3}}), std::vector<int>{0},
                                 GradientMode::EuclideanBackprop);
  // Moving toward class 0 (positive x) lowers the loss.
  CHECK(g(0, 0) < 0.0);
}

TEST_CASE("centroids") {
  CHECK(euclidean_centroid(Matrix::from_rows({{1, 2}})) == Vector{1, 2});
  CHECK(euclidean_centroid(Matrix::from_rows({{1, 0}, {-1, 0}})) == Vector{0, 0});
  CHECK(euclidean_centroid(Matrix::from_rows({{0, 0}, {2, 0}, {1, 3}})) == Vector{1, 1});
  CHECK_THROWS_AS(euclidean_centroid(Matrix()), DomainError);
}

TEST_CASE("einstein midpoint") {
  const double k = -0.05;
  const Vector p = ball_point(5, k);
  const Vector same = einstein_midpoint(Matrix::from_rows({p, p, p}), k);
  for (std::size_t j = 0; j < p.size(); ++j) CHECK(same[j] == doctest::Approx(p[j]).epsilon(1e-12));
  Vector neg = p;
  for (double& v : neg) v = -v;
  CHECK(norm(einstein_midpoint(Matrix::from_rows({p, neg}), k)) < 1e-12);

  for (int n = 0; n < 200; ++n) {
    const Matrix pair = Matrix::from_rows({ball_point(4, k, 0.99), ball_point(4, k, 0.99)});
    const Vector m = einstein_midpoint(pair, k);
    const auto ball = CurvatureSpace::poincare_ball(k);
    const double lhs = space_distance(ball, pair.row(0), m) + space_distance(ball, m, pair.row(1));
    CHECK(lhs == doctest::Approx(space_distance(ball, pair.row(0), pair.row(1))).epsilon(1e-9));
    // Equidistant from both ends.
    CHECK(space_distance(ball, pair.row(0), m) == doctest::Approx(space_distance(ball, m, pair.row(1))).epsilon(1e-8));
  }

  const Matrix set = Matrix::from_rows({ball_point(3, k), ball_point(3, k), ball_point(3, k)});
  const Matrix shuffled = Matrix::from_rows({to_vector(set.row(2)), to_vector(set.row(0)), to_vector(set.row(1))});
  const Vector a = einstein_midpoint(set, k);
  const Vector b = einstein_midpoint(shuffled, k);
  for (std::size_t j = 0; j < a.size(); ++j) CHECK(a[j] == doctest::Approx(b[j]).epsilon(1e-13));

  const std::vector<PoincarePoint> pts{PoincarePoint(to_vector(set.row(0)), k), PoincarePoint(to_vector(set.row(1)), k)};
  CHECK(einstein_midpoint(pts).k() == k);
  const std::vector<PoincarePoint> mixed{PoincarePoint({0.1}, k), PoincarePoint({0.1}, -1)};
  CHECK_THROWS_AS(einstein_midpoint(mixed), DomainError);
  CHECK_THROWS_AS(einstein_midpoint(Matrix::from_rows({{10.0}}), k), DomainError);
}

TEST_CASE("einstein midpoint backward matches finite differences") {
  const double k = -0.05;
  for (int n = 0; n < 50; ++n) {
    Matrix pts;
    for (int i = 0; i < 4; ++i) pts.push_row(ball_point(5, k, 0.95));
    const Vector weights = gaussian(5);
    auto f = [&](const Matrix& m) {
      const Vector mid = einstein_midpoint(m, k);
      double s = 0;
      for (std::size_t j = 0; j < mid.size(); ++j) s += weights[j] * mid[j];
      return s;
    };
    const Matrix analytic = einstein_midpoint_backward(pts, k, weights);
    CHECK(relative_error(analytic, numeric_gradient(f, pts, 1e-6)) < 1e-6);
  }
}

TEST_CASE("feature maps") {
  CHECK(clip_features(Vector{3, 4}, {2.5}) == Vector{1.5, 2.0});
  CHECK(clip_features(Vector{0.3, 0.4}, {2.5}) == Vector{0.3, 0.4});
  CHECK(clip_features(Vector{30, 40}, {}) == Vector{30, 40});
  const Vector once = clip_features(Vector{7, -1, 2}, {1.5});
  CHECK(clip_features(once, {1.5}) == once);
  for (int i = 0; i < 100; ++i) {
    const Vector v = gaussian(16, 10.0);
    CHECK(poincare_exp0(clip_features(v, {2.0}), -0.05).norm() <= 1.8771 + 1e-4);
  }
  CHECK_THROWS_AS(clip_features(Vector{1}, {0.0}), DomainError);

  CHECK(fixed_radius_rescale(Vector{3, 4}, 10) == Vector{6, 8});
  for (int i = 0; i < 100; ++i) CHECK(norm(fixed_radius_rescale(gaussian(9), 22.36)) == doctest::Approx(22.36));
  CHECK_THROWS_AS(fixed_radius_rescale(Vector{0, 0}, 1), DegenerateInputError);
}

TEST_CASE("compute prototypes per space") {
  const Matrix emb = Matrix::from_rows({{3, 0}, {0, 3}, {-3, 0}, {0, -3}});
  const std::vector<int> labels{0, 0, 1, 1};
  const auto sphere = CurvatureSpace::fixed_radius_sphere(3);
  const auto p = compute_prototypes(sphere, emb, labels, 2);
  CHECK(norm(p.centroids().row(0)) == doctest::Approx(3.0));
  CHECK(p.centroids()(0, 0) == doctest::Approx(3 / std::sqrt(2.0)));
  const auto raw = compute_prototypes(sphere, emb, labels, 2, {.renormalize_sphere = false});
  CHECK(raw.centroids()(0, 0) == doctest::Approx(1.5));
  const auto e = compute_prototypes(CurvatureSpace::euclidean_squared(), emb, labels, 2);
  CHECK(e.centroids()(1, 1) == doctest::Approx(-1.5));
  CHECK_THROWS_AS(compute_prototypes(sphere, emb, std::vector<int>{0, 0, 0, 0}, 2), DomainError);
  // Antipodal support points have no sphere centroid direction.
  CHECK_THROWS_AS(compute_prototypes(sphere, Matrix::from_rows({{3, 0}, {-3, 0}}), std::vector<int>{0, 0}, 1),
                  DegenerateInputError);
}

TEST_CASE("prototype backward matches finite differences") {
  const std::vector<int> labels{0, 1, 0, 2, 1, 2, 2};
  for (const auto& space : {CurvatureSpace::euclidean_squared(), CurvatureSpace::poincare_ball(-0.05),
                            CurvatureSpace::fixed_radius_sphere(4.0)}) {
    CAPTURE(space.describe());
    for (int n = 0; n < 20; ++n) {
      Matrix emb;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (space.is_poincare()) emb.push_row(ball_point(6, -0.05));
        else if (space.is_sphere()) emb.push_row(fixed_radius_rescale(gaussian(6), 4.0));
        else emb.push_row(gaussian(6));
      }
      Matrix weights(3, 6);
      for (double& v : weights.data()) v = gaussian(1)[0];
      auto f = [&](const Matrix& m) {
        // Sphere finite differences leave the sphere; evaluate the centroid
        // map directly on the perturbed rows.
        Matrix protos(3, 6);
        for (int c = 0; c < 3; ++c) {
          Matrix g;
          for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == c) g.push_row(m.row(i));
          }
          Vector mid = space.is_poincare() ? einstein_midpoint(g, -0.05) : euclidean_centroid(g);
          if (space.is_sphere()) mid = fixed_radius_rescale(mid, 4.0);
          std::copy(mid.begin(), mid.end(), protos.row(c).begin());
        }
        double s = 0;
        for (std::size_t i = 0; i < protos.data().size(); ++i) s += protos.data()[i] * weights.data()[i];
        return s;
      };
      const Matrix analytic = prototypes_backward(space, emb, labels, 3, {}, weights);
      CHECK(relative_error(analytic, numeric_gradient(f, emb, 1e-6)) < 1e-6);
    }
  }
}
