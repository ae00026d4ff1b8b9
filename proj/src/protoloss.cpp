#include "hyperproto/protoloss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hyperproto/errors.hpp"
#include "hyperproto/kernels.hpp"

namespace hyperproto {

namespace {

void check_labels(std::span<const int> labels, std::size_t rows, std::size_t classes) {
  if (labels.size() != rows) {
    throw DimensionError("got " + std::to_string(labels.size()) + " labels for " + std::to_string(rows) + " rows");
  }
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= classes) {
      throw DomainError("label " + std::to_string(l) + " does not index one of " + std::to_string(classes) + " classes");
    }
  }
}

// Distances from z to every prototype.
Vector distances_to(const PrototypeSet& protos, std::span<const double> z) {
  Vector d(protos.size());
  for (std::size_t j = 0; j < protos.size(); ++j) d[j] = space_distance(protos.space(), protos.centroids().row(j), z);
  return d;
}

double log_sum_exp_negated(const Vector& d) {
  const double lo = *std::min_element(d.begin(), d.end());
  double s = 0.0;
  for (double v : d) s += std::exp(lo - v);
  return -lo + std::log(s);
}

void check_queries(const PrototypeSet& protos, const Matrix& queries, std::span<const int> labels) {
  if (protos.size() < 2) throw DomainError("the loss needs at least two prototypes");
  if (queries.cols() != protos.dim() && !queries.empty()) throw DimensionError("query and prototype dimensions differ");
  check_labels(labels, queries.rows(), protos.size());
  for (std::size_t i = 0; i < queries.rows(); ++i) check_point(protos.space(), queries.row(i));
}

}  // namespace

std::string_view to_string(GradientMode mode) {
  return mode == GradientMode::RiemannianScaled ? "riemannian" : "euclidean";
}

void check_point(const CurvatureSpace& space, std::span<const double> x) {
  switch (space.kind()) {
    case SpaceKind::EuclideanSquared:
      for (double v : x) {
        if (!std::isfinite(v)) throw DomainError("nonfinite coordinate");
      }
      return;
    case SpaceKind::PoincareBall:
      ball::check_inside(x, space.k());
      return;
    case SpaceKind::FixedRadiusSphere: {
      const double r = space.radius();
      const double n = std::sqrt(kernels::squared_norm(x));
      if (!(std::abs(n - r) <= 1e-9 * std::max(1.0, r))) {
        throw DomainError("point of norm " + std::to_string(n) + " is not on the sphere of radius " + std::to_string(r));
      }
      return;
    }
  }
}

double space_distance(const CurvatureSpace& space, std::span<const double> x, std::span<const double> y) {
  switch (space.kind()) {
    case SpaceKind::EuclideanSquared: return kernels::squared_distance(x, y);
    case SpaceKind::PoincareBall: return ball::distance(x, y, space.k());
    case SpaceKind::FixedRadiusSphere: return chordal_distance(x, y);
  }
  return 0.0;
}

void space_distance_gradient(const CurvatureSpace& space, std::span<const double> x, std::span<const double> y,
                             std::span<double> out) {
  switch (space.kind()) {
    case SpaceKind::EuclideanSquared:
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = 2.0 * (x[i] - y[i]);
      return;
    case SpaceKind::PoincareBall:
      ball::distance_gradient(x, y, space.k(), out);
      return;
    case SpaceKind::FixedRadiusSphere: {
      const double n = chordal_distance(x, y);
      if (!(n > 0.0)) throw SingularGradientError("chordal distance gradient is singular at coincident points");
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - y[i]) / n;
      return;
    }
  }
}

PrototypeSet::PrototypeSet(Matrix centroids, CurvatureSpace space, bool allow_inside_sphere)
    : centroids_(std::move(centroids)), space_(space) {
  if (centroids_.empty()) throw DomainError("a prototype set needs at least one centroid");
  const bool relaxed = allow_inside_sphere && space_.is_sphere();
  for (std::size_t j = 0; j < centroids_.rows(); ++j) {
    if (!relaxed) {
      check_point(space_, centroids_.row(j));
      continue;
    }
    const double n = std::sqrt(kernels::squared_norm(centroids_.row(j)));
    if (!std::isfinite(n) || n > space_.radius() * (1.0 + 1e-9)) {
      throw DomainError("sphere centroid lies outside the sphere");
    }
  }
}

Vector class_probabilities(const PrototypeSet& prototypes, std::span<const double> z) {
  if (z.size() != prototypes.dim()) throw DimensionError("query and prototype dimensions differ");
  check_point(prototypes.space(), z);
  Vector p = distances_to(prototypes, z);
  const double lo = *std::min_element(p.begin(), p.end());
  double s = 0.0;
  for (double& v : p) {
    v = std::exp(lo - v);
    s += v;
  }
  for (double& v : p) v /= s;
  return p;
}

int predict_class(const PrototypeSet& prototypes, std::span<const double> z) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < prototypes.size(); ++j) {
    const double d = space_distance(prototypes.space(), prototypes.centroids().row(j), z);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(j);
    }
  }
  return best;
}

double prototypical_loss(const PrototypeSet& prototypes, const Matrix& queries, std::span<const int> labels) {
  check_queries(prototypes, queries, labels);
  double loss = 0.0;
  for (std::size_t i = 0; i < queries.rows(); ++i) {
    const Vector d = distances_to(prototypes, queries.row(i));
    loss += d[labels[i]] + log_sum_exp_negated(d);
  }
  return loss;
}

LossGradients loss_and_gradients(const PrototypeSet& prototypes, const Matrix& queries, std::span<const int> labels) {
  check_queries(prototypes, queries, labels);
  const auto& space = prototypes.space();
  const std::size_t dim = prototypes.dim();
  LossGradients out{0.0, Matrix(queries.rows(), dim), Matrix(prototypes.size(), dim)};
  Vector tmp(dim);
  for (std::size_t i = 0; i < queries.rows(); ++i) {
    const auto x = queries.row(i);
    const Vector d = distances_to(prototypes, x);
    const double lse = log_sum_exp_negated(d);
    out.loss += d[labels[i]] + lse;
    for (std::size_t j = 0; j < prototypes.size(); ++j) {
      const double coef = (static_cast<int>(j) == labels[i] ? 1.0 : 0.0) - std::exp(-d[j] - lse);
      const auto w = prototypes.centroids().row(j);
      space_distance_gradient(space, x, w, tmp);
      kernels::axpy(coef, tmp, out.queries.row(i));
      space_distance_gradient(space, w, x, tmp);
      kernels::axpy(coef, tmp, out.prototypes.row(j));
    }
  }
  return out;
}

void apply_riemannian_scaling(double k, const Matrix& points, Matrix& grads) {
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const double lambda = ball::conformal_factor(points.row(i), k);
    const double s = 1.0 / (lambda * lambda);
    for (double& g : grads.row(i)) g *= s;
  }
}

Matrix loss_gradient(const PrototypeSet& prototypes, const Matrix& queries, std::span<const int> labels,
                     GradientMode mode) {
  if (mode == GradientMode::RiemannianScaled && !prototypes.space().is_poincare()) {
    throw DomainError("Riemannian scaling is only defined on the Poincare ball");
  }
  LossGradients g = loss_and_gradients(prototypes, queries, labels);
  if (mode == GradientMode::RiemannianScaled) apply_riemannian_scaling(prototypes.space().k(), queries, g.queries);
  return std::move(g.queries);
}

// --- centroids -------------------------------------------------------------

Vector euclidean_centroid(const Matrix& points) {
  if (points.empty()) throw DomainError("centroid of an empty set");
  Vector mean(points.cols(), 0.0);
  for (std::size_t i = 0; i < points.rows(); ++i) kernels::axpy(1.0, points.row(i), mean);
  kernels::scale(1.0 / static_cast<double>(points.rows()), mean);
  return mean;
}

namespace {

struct KleinTerms {
  Matrix klein;   // kappa_i
  Vector gamma;   // Lorentz factors
  Vector q;       // 1 + c^2 ||u_i||^2
  Vector mean;    // Klein-model weighted mean
  double gamma_sum = 0.0;
};

KleinTerms klein_terms(const Matrix& points, double k) {
  if (points.empty()) throw DomainError("midpoint of an empty set");
  if (!(k < 0.0)) throw DomainError("Einstein midpoint needs a negative curvature");
  const double c2 = -k;
  KleinTerms t{Matrix(points.rows(), points.cols()), Vector(points.rows()), Vector(points.rows()),
               Vector(points.cols(), 0.0)};
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const auto u = points.row(i);
    ball::check_inside(u, k);
    const double n2 = kernels::squared_norm(u);
    t.q[i] = 1.0 + c2 * n2;
    auto kappa = t.klein.row(i);
    for (std::size_t j = 0; j < u.size(); ++j) kappa[j] = 2.0 * u[j] / t.q[i];
    // 1 - c^2 ||kappa||^2 = ((1 - c^2||u||^2)/q)^2
    t.gamma[i] = t.q[i] / (1.0 - c2 * n2);
    t.gamma_sum += t.gamma[i];
    kernels::axpy(t.gamma[i], kappa, t.mean);
  }
  kernels::scale(1.0 / t.gamma_sum, t.mean);
  return t;
}

}  // namespace

Vector einstein_midpoint(const Matrix& points, double k) {
  const KleinTerms t = klein_terms(points, k);
  const double s = std::sqrt(std::max(0.0, 1.0 + k * kernels::squared_norm(t.mean)));
  Vector out(t.mean);
  kernels::scale(1.0 / (1.0 + s), out);
  ball::check_inside(out, k);
  return out;
}

PoincarePoint einstein_midpoint(std::span<const PoincarePoint> points) {
  if (points.empty()) throw DomainError("midpoint of an empty set");
  Matrix m;
  for (const auto& p : points) {
    if (p.k() != points.front().k()) throw DomainError("curvature mismatch in Einstein midpoint");
    m.push_row(p.coords());
  }
  return {einstein_midpoint(m, points.front().k()), points.front().k()};
}

Matrix einstein_midpoint_backward(const Matrix& points, double k, std::span<const double> grad_midpoint) {
  if (grad_midpoint.size() != points.cols()) throw DimensionError("midpoint gradient has the wrong length");
  const KleinTerms t = klein_terms(points, k);
  const double c2 = -k;
  const std::size_t dim = points.cols();

  // u = m / (1 + s), s = sqrt(1 - c^2||m||^2):
  // du/dm = I/(1+s) + c^2 m m^T / (s (1+s)^2)
  const double s = std::sqrt(std::max(0.0, 1.0 - c2 * kernels::squared_norm(t.mean)));
  Vector g_mean(grad_midpoint.begin(), grad_midpoint.end());
  kernels::scale(1.0 / (1.0 + s), g_mean);
  kernels::axpy(c2 * kernels::dot(t.mean, grad_midpoint) / (s * (1.0 + s) * (1.0 + s)), t.mean, g_mean);

  Matrix grads(points.rows(), dim);
  Vector g_kappa(dim);
  Vector diff(dim);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const auto kappa = t.klein.row(i);
    const double gi = t.gamma[i];
    // m = sum gamma_i kappa_i / sum gamma_i, d gamma/d kappa = gamma^3 c^2 kappa
    for (std::size_t j = 0; j < dim; ++j) diff[j] = kappa[j] - t.mean[j];
    std::fill(g_kappa.begin(), g_kappa.end(), 0.0);
    kernels::axpy(gi / t.gamma_sum, g_mean, g_kappa);
    kernels::axpy(gi * gi * gi * c2 * kernels::dot(diff, g_mean) / t.gamma_sum, kappa, g_kappa);
    // kappa = 2u/q: dkappa/du = 2I/q - 4c^2 u u^T / q^2
    const auto u = points.row(i);
    auto g_u = grads.row(i);
    const double q = t.q[i];
    for (std::size_t j = 0; j < dim; ++j) g_u[j] = 2.0 * g_kappa[j] / q;
    kernels::axpy(-4.0 * c2 * kernels::dot(u, g_kappa) / (q * q), u, g_u);
  }
  return grads;
}

// --- feature maps ------------------------------------------------------------

Vector clip_features(std::span<const double> v, const ClipConfig& clip) {
  Vector out(v.begin(), v.end());
  if (!clip.max_norm) return out;
  const double c = *clip.max_norm;
  if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("clipping magnitude must be positive and finite");
  const double n = std::sqrt(kernels::squared_norm(v));
  if (n > c) kernels::scale(c / n, out);
  return out;
}

Vector fixed_radius_rescale(std::span<const double> v, double r) {
  if (!(r > 0.0)) throw DomainError("sphere radius must be positive");
  const double n = std::sqrt(kernels::squared_norm(v));
  if (!(n > 0.0)) throw DegenerateInputError("cannot rescale the zero vector onto a sphere");
  Vector out(v.begin(), v.end());
  kernels::scale(r / n, out);
  return out;
}

// --- prototypes ------------------------------------------------------------

namespace {

std::vector<Matrix> group_by_class(const Matrix& embeddings, std::span<const int> labels, int num_classes) {
  if (num_classes < 1) throw DomainError("need at least one class");
  check_labels(labels, embeddings.rows(), static_cast<std::size_t>(num_classes));
  std::vector<Matrix> groups(num_classes);
  for (std::size_t i = 0; i < embeddings.rows(); ++i) groups[labels[i]].push_row(embeddings.row(i));
  for (int c = 0; c < num_classes; ++c) {
    if (groups[c].empty()) throw DomainError("class " + std::to_string(c) + " has no support embeddings");
  }
  return groups;
}

}  // namespace

PrototypeSet compute_prototypes(const CurvatureSpace& space, const Matrix& embeddings, std::span<const int> labels,
                                int num_classes, const PrototypeOptions& options) {
  const auto groups = group_by_class(embeddings, labels, num_classes);
  Matrix centroids;
  for (const auto& g : groups) {
    switch (space.kind()) {
      case SpaceKind::EuclideanSquared:
        centroids.push_row(euclidean_centroid(g));
        break;
      case SpaceKind::PoincareBall:
        centroids.push_row(einstein_midpoint(g, space.k()));
        break;
      case SpaceKind::FixedRadiusSphere: {
        Vector mean = euclidean_centroid(g);
        if (options.renormalize_sphere) mean = fixed_radius_rescale(mean, space.radius());
        centroids.push_row(mean);
        break;
      }
    }
  }
  return {std::move(centroids), space, !options.renormalize_sphere};
}

Matrix prototypes_backward(const CurvatureSpace& space, const Matrix& embeddings, std::span<const int> labels,
                           int num_classes, const PrototypeOptions& options, const Matrix& grad_prototypes) {
  if (grad_prototypes.rows() != static_cast<std::size_t>(num_classes) || grad_prototypes.cols() != embeddings.cols()) {
    throw DimensionError("prototype gradient has the wrong shape");
  }
  const auto groups = group_by_class(embeddings, labels, num_classes);
  std::vector<Matrix> group_grads(num_classes);
  for (int c = 0; c < num_classes; ++c) {
    const Matrix& g = groups[c];
    const auto gw = grad_prototypes.row(c);
    if (space.is_poincare()) {
      group_grads[c] = einstein_midpoint_backward(g, space.k(), gw);
      continue;
    }
    Vector g_mean(gw.begin(), gw.end());
    if (space.is_sphere() && options.renormalize_sphere) {
      // w = r m / |m|: dw/dm = (r/|m|)(I - m^ m^T)
      const Vector mean = euclidean_centroid(g);
      const double n = std::sqrt(kernels::squared_norm(mean));
      const double along = kernels::dot(mean, gw) / (n * n);
      kernels::axpy(-along, mean, g_mean);
      kernels::scale(space.radius() / n, g_mean);
    }
    kernels::scale(1.0 / static_cast<double>(g.rows()), g_mean);
    group_grads[c] = Matrix(g.rows(), g.cols());
    for (std::size_t i = 0; i < g.rows(); ++i) std::copy(g_mean.begin(), g_mean.end(), group_grads[c].row(i).begin());
  }
  Matrix out(embeddings.rows(), embeddings.cols());
  std::vector<std::size_t> cursor(num_classes, 0);
  for (std::size_t i = 0; i < embeddings.rows(); ++i) {
    const auto src = group_grads[labels[i]].row(cursor[labels[i]]++);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace hyperproto
