#pragma once

// Two-layer perceptron encoder (input -> tanh hidden -> d) with Adam state,
// and the per-space maps from raw features to embeddings, each with its
// vector-Jacobian product.

#include <cstdint>
#include <span>

#include "hyperproto/geometry.hpp"
#include "hyperproto/matrix.hpp"
#include "hyperproto/protoloss.hpp"

namespace hyperproto {

struct EncoderShape {
  int input_dim = 64;
  int hidden_dim = 64;
  int output_dim = 128;

  void validate() const;
  std::size_t parameter_count() const;
  bool operator==(const EncoderShape&) const = default;
};

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Flat parameter storage laid out as W1 (hidden x input), b1, W2 (out x
/// hidden), b2, with a gradient buffer and Adam moments of the same length.
class EncoderParams {
 public:
  /// Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases.
  EncoderParams(const EncoderShape& shape, std::uint64_t seed);
  static EncoderParams zeros(const EncoderShape& shape);

  const EncoderShape& shape() const noexcept { return shape_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> gradient() const noexcept { return grad_; }
  std::span<double> gradient() noexcept { return grad_; }
  long adam_steps() const noexcept { return step_; }

  std::span<const double> w1() const noexcept;
  std::span<const double> b1() const noexcept;
  std::span<const double> w2() const noexcept;
  std::span<const double> b2() const noexcept;

  void zero_gradient();
  /// One Adam step with the current gradient buffer.
  void adam_step(double learning_rate, const AdamSettings& settings = {});

  bool operator==(const EncoderParams&) const = default;

 private:
  explicit EncoderParams(const EncoderShape& shape);

  EncoderShape shape_;
  Vector values_;
  Vector grad_;
  Vector m_;
  Vector v_;
  long step_ = 0;
};

/// Activations kept for the backward pass.
struct ForwardCache {
  Matrix inputs;
  Matrix hidden;
};

/// Raw features f(x) for every input row. NumericError on nonfinite output.
Matrix encoder_forward(const EncoderParams& params, const Matrix& inputs, ForwardCache* cache = nullptr);
/// Accumulates dL/dtheta into params.gradient() given dL/df for every row.
void encoder_backward(EncoderParams& params, const ForwardCache& cache, const Matrix& grad_features);

/// The map from raw features to points of the space: identity, clipping then
/// Exp_0 then projection onto the effective radius, or rescaling to the sphere.
struct EmbeddingMap {
  CurvatureSpace space = CurvatureSpace::euclidean_squared();
  ClipConfig clip;
  /// Added to the feature norm before rescaling onto the sphere.
  double norm_epsilon = 1e-12;
};

Matrix embed(const EmbeddingMap& map, const Matrix& features);
/// dL/df given the features that were embedded and dL/dz.
Matrix embed_backward(const EmbeddingMap& map, const Matrix& features, const Matrix& grad_embeddings);

/// encoder_forward followed by embed.
Matrix encode(const EncoderParams& params, const Matrix& inputs, const EmbeddingMap& map);

}  // namespace hyperproto
