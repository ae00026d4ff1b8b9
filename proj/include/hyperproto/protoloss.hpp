#pragma once

// Prototypical classification: distances per space, softmax class
// probabilities, the negative log-likelihood loss and its analytic gradients,
// class centroids and the feature maps applied before the loss.

#include <optional>
#include <span>

#include "hyperproto/geometry.hpp"
#include "hyperproto/matrix.hpp"

namespace hyperproto {

/// Optional cap on the Euclidean norm of features before Exp_0.
struct ClipConfig {
  std::optional<double> max_norm;
};

enum class GradientMode { EuclideanBackprop, RiemannianScaled };

std::string_view to_string(GradientMode mode);

/// Throws DomainError when `x` is not a valid point of `space`.
void check_point(const CurvatureSpace& space, std::span<const double> x);

/// Squared Euclidean distance, Poincaré geodesic distance or chordal distance
/// depending on the space. Inputs are not validated; see check_point.
double space_distance(const CurvatureSpace& space, std::span<const double> x, std::span<const double> y);
/// Gradient of space_distance(space, x, y) with respect to x.
void space_distance_gradient(const CurvatureSpace& space, std::span<const double> x, std::span<const double> y,
                             std::span<double> out);

/// One centroid per class, all valid points of `space`. Sphere centroids may
/// be allowed to sit strictly inside the sphere, for un-renormalized means.
class PrototypeSet {
 public:
  PrototypeSet(Matrix centroids, CurvatureSpace space, bool allow_inside_sphere = false);

  const Matrix& centroids() const noexcept { return centroids_; }
  const CurvatureSpace& space() const noexcept { return space_; }
  std::size_t size() const noexcept { return centroids_.rows(); }
  std::size_t dim() const noexcept { return centroids_.cols(); }

 private:
  Matrix centroids_;
  CurvatureSpace space_;
};

/// softmax(-d(w_c, z)) over the prototypes.
Vector class_probabilities(const PrototypeSet& prototypes, std::span<const double> z);

/// Index of the nearest prototype; ties go to the lowest index.
int predict_class(const PrototypeSet& prototypes, std::span<const double> z);

/// sum_i [ d(w_{c_i}, x_i) + log sum_j exp(-d(w_j, x_i)) ].
double prototypical_loss(const PrototypeSet& prototypes, const Matrix& queries, std::span<const int> labels);

/// dL/dx_i for every query row. RiemannianScaled multiplies each row by
/// lambda(x_i)^{-2} and is only valid on the Poincaré ball.
Matrix loss_gradient(const PrototypeSet& prototypes, const Matrix& queries, std::span<const int> labels,
                     GradientMode mode);

struct LossGradients {
  double loss = 0.0;
  Matrix queries;     // dL/dx_i
  Matrix prototypes;  // dL/dw_j
};

/// Loss together with its Euclidean gradients for queries and prototypes.
LossGradients loss_and_gradients(const PrototypeSet& prototypes, const Matrix& queries, std::span<const int> labels);

/// Multiplies row i of `grads` by lambda(points_i)^{-2}.
void apply_riemannian_scaling(double k, const Matrix& points, Matrix& grads);

Vector euclidean_centroid(const Matrix& points);

/// Lorentz-factor weighted mean in the Klein model, mapped back to the
/// Poincaré ball.
Vector einstein_midpoint(const Matrix& points, double k);
PoincarePoint einstein_midpoint(std::span<const PoincarePoint> points);
/// Vector-Jacobian product of einstein_midpoint: one gradient row per input.
Matrix einstein_midpoint_backward(const Matrix& points, double k, std::span<const double> grad_midpoint);

Vector clip_features(std::span<const double> v, const ClipConfig& clip);
/// r v / ||v||. DegenerateInputError for the zero vector.
Vector fixed_radius_rescale(std::span<const double> v, double r);

struct PrototypeOptions {
  /// Rescale fixed-radius centroids back onto the sphere.
  bool renormalize_sphere = true;
};

/// Euclidean centroids for the Euclidean space and the sphere (optionally
/// renormalized), Einstein midpoints for the Poincaré ball.
PrototypeSet compute_prototypes(const CurvatureSpace& space, const Matrix& embeddings, std::span<const int> labels,
                                int num_classes, const PrototypeOptions& options = {});

/// Pulls prototype gradients back onto the embeddings they were built from.
Matrix prototypes_backward(const CurvatureSpace& space, const Matrix& embeddings, std::span<const int> labels,
                           int num_classes, const PrototypeOptions& options, const Matrix& grad_prototypes);

}  // namespace hyperproto
