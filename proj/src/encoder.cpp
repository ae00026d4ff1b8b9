#include "hyperproto/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "hyperproto/errors.hpp"
#include "hyperproto/hierarchy.hpp"
#include "hyperproto/kernels.hpp"

namespace hyperproto {

void EncoderShape::validate() const {
  if (input_dim < 1) throw ConfigError("input_dim", "must be positive");
  if (hidden_dim < 1) throw ConfigError("hidden_dim", "must be positive");
  if (output_dim < 1) throw ConfigError("d", "must be positive");
}

std::size_t EncoderShape::parameter_count() const {
  const auto in = static_cast<std::size_t>(input_dim);
  const auto hid = static_cast<std::size_t>(hidden_dim);
  const auto out = static_cast<std::size_t>(output_dim);
  return hid * in + hid + out * hid + out;
}

EncoderParams::EncoderParams(const EncoderShape& shape) : shape_(shape) {
  shape_.validate();
  const std::size_t n = shape_.parameter_count();
  values_.assign(n, 0.0);
  grad_.assign(n, 0.0);
  m_.assign(n, 0.0);
  v_.assign(n, 0.0);
}

EncoderParams EncoderParams::zeros(const EncoderShape& shape) { return EncoderParams(shape); }

EncoderParams::EncoderParams(const EncoderShape& shape, std::uint64_t seed) : EncoderParams(shape) {
  Rng rng(seed);
  auto fill = [&](std::span<double> w, int fan_in, int fan_out) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (double& x : w) x = u(rng);
  };
  const auto hid = static_cast<std::size_t>(shape_.hidden_dim);
  const std::size_t w1_size = hid * shape_.input_dim;
  const std::size_t w2_offset = w1_size + hid;
  fill(std::span(values_).subspan(0, w1_size), shape_.input_dim, shape_.hidden_dim);
  fill(std::span(values_).subspan(w2_offset, static_cast<std::size_t>(shape_.output_dim) * hid), shape_.hidden_dim,
       shape_.output_dim);
}

std::span<const double> EncoderParams::w1() const noexcept {
  return std::span(values_).subspan(0, static_cast<std::size_t>(shape_.hidden_dim) * shape_.input_dim);
}
std::span<const double> EncoderParams::b1() const noexcept {
  return std::span(values_).subspan(w1().size(), static_cast<std::size_t>(shape_.hidden_dim));
}
std::span<const double> EncoderParams::w2() const noexcept {
  return std::span(values_).subspan(w1().size() + b1().size(),
                                    static_cast<std::size_t>(shape_.output_dim) * shape_.hidden_dim);
}
std::span<const double> EncoderParams::b2() const noexcept {
  return std::span(values_).subspan(values_.size() - static_cast<std::size_t>(shape_.output_dim));
}

void EncoderParams::zero_gradient() { std::fill(grad_.begin(), grad_.end(), 0.0); }

void EncoderParams::adam_step(double learning_rate, const AdamSettings& s) {
  ++step_;
  const double bias1 = 1.0 - std::pow(s.beta1, static_cast<double>(step_));
  const double bias2 = 1.0 - std::pow(s.beta2, static_cast<double>(step_));
  kernels::AdamCoefficients coef{s.beta1, s.beta2, learning_rate / bias1, 1.0 / std::sqrt(bias2), s.eps};
  kernels::adam_update(values_, grad_, m_, v_, coef);
}

Matrix encoder_forward(const EncoderParams& params, const Matrix& inputs, ForwardCache* cache) {
  const auto& shape = params.shape();
  if (inputs.cols() != static_cast<std::size_t>(shape.input_dim)) {
    throw DimensionError("encoder expects " + std::to_string(shape.input_dim) + " inputs, got " +
                         std::to_string(inputs.cols()));
  }
  const auto hid = static_cast<std::size_t>(shape.hidden_dim);
  const auto out = static_cast<std::size_t>(shape.output_dim);
  const auto w1 = params.w1();
  const auto b1 = params.b1();
  const auto w2 = params.w2();
  const auto b2 = params.b2();
  Matrix hidden(inputs.rows(), hid);
  Matrix features(inputs.rows(), out);
  for (std::size_t r = 0; r < inputs.rows(); ++r) {
    const auto x = inputs.row(r);
    auto h = hidden.row(r);
    for (std::size_t i = 0; i < hid; ++i) h[i] = std::tanh(kernels::dot(w1.subspan(i * x.size(), x.size()), x) + b1[i]);
    auto f = features.row(r);
    for (std::size_t i = 0; i < out; ++i) {
      f[i] = kernels::dot(w2.subspan(i * hid, hid), h) + b2[i];
      if (!std::isfinite(f[i])) throw NumericError("encoder produced a nonfinite feature");
    }
  }
  if (cache) {
    cache->inputs = inputs;
    cache->hidden = std::move(hidden);
  }
  return features;
}

void encoder_backward(EncoderParams& params, const ForwardCache& cache, const Matrix& grad_features) {
  const auto& shape = params.shape();
  const auto in = static_cast<std::size_t>(shape.input_dim);
  const auto hid = static_cast<std::size_t>(shape.hidden_dim);
  const auto out = static_cast<std::size_t>(shape.output_dim);
  if (grad_features.rows() != cache.inputs.rows() || grad_features.cols() != out) {
    throw DimensionError("feature gradient has the wrong shape");
  }
  auto grad = params.gradient();
  auto g_w1 = grad.subspan(0, hid * in);
  auto g_b1 = grad.subspan(hid * in, hid);
  auto g_w2 = grad.subspan(hid * in + hid, out * hid);
  auto g_b2 = grad.subspan(hid * in + hid + out * hid, out);
  const auto w2 = params.w2();
  Vector g_h(hid);
  for (std::size_t r = 0; r < cache.inputs.rows(); ++r) {
    const auto gf = grad_features.row(r);
    const auto h = cache.hidden.row(r);
    const auto x = cache.inputs.row(r);
    std::fill(g_h.begin(), g_h.end(), 0.0);
    for (std::size_t i = 0; i < out; ++i) {
      if (gf[i] == 0.0) continue;
      kernels::axpy(gf[i], h, g_w2.subspan(i * hid, hid));
      kernels::axpy(gf[i], w2.subspan(i * hid, hid), g_h);
      g_b2[i] += gf[i];
    }
    for (std::size_t i = 0; i < hid; ++i) {
      const double g_pre = g_h[i] * (1.0 - h[i] * h[i]);
      if (g_pre == 0.0) continue;
      kernels::axpy(g_pre, x, g_w1.subspan(i * in, in));
      g_b1[i] += g_pre;
    }
  }
}

// --- embedding maps --------------------------------------------------------

namespace {

// Forward of the Poincare chain for one row; returns the clipped feature and
// the ball point before the effective-radius projection.
struct BallChain {
  Vector clipped;
  Vector exp;
  bool was_clipped = false;
  bool was_capped = false;
};

BallChain ball_chain(const EmbeddingMap& map, std::span<const double> f) {
  BallChain b;
  b.clipped = clip_features(f, map.clip);
  b.was_clipped = map.clip.max_norm && std::sqrt(kernels::squared_norm(f)) > *map.clip.max_norm;
  b.exp.resize(f.size());
  ball::exp0(b.clipped, map.space.k(), b.exp);
  b.was_capped = std::sqrt(kernels::squared_norm(b.exp)) > map.space.effective_radius();
  return b;
}

// out = (s/|v|)(g - v^ (v^ . g)): VJP of v -> s v/|v|.
void radial_projection_vjp(std::span<const double> v, double s, std::span<double> g) {
  const double n2 = kernels::squared_norm(v);
  const double along = kernels::dot(v, g) / n2;
  kernels::axpy(-along, v, g);
  kernels::scale(s / std::sqrt(n2), g);
}

// VJP of Exp_0 at v: phi g + (phi'/|v|) v (v . g), phi(n) = tanh(cn)/(cn).
void exp0_vjp(std::span<const double> v, double k, std::span<double> g) {
  const double c = std::sqrt(-k);
  const double x = c * std::sqrt(kernels::squared_norm(v));
  double phi = 1.0;
  double dphi_over_n = -2.0 / 3.0 * c * c;
  if (x < 1e-3) {
    phi = 1.0 - x * x / 3.0;
    dphi_over_n = c * c * (-2.0 / 3.0 + 8.0 * x * x / 15.0);
  } else {
    const double t = std::tanh(x);
    const double sech2 = 1.0 - t * t;
    phi = t / x;
    dphi_over_n = c * c * (x * sech2 - t) / (x * x * x);
  }
  const double vg = kernels::dot(v, g);
  kernels::scale(phi, g);
  kernels::axpy(dphi_over_n * vg, v, g);
}

}  // namespace

Matrix embed(const EmbeddingMap& map, const Matrix& features) {
  Matrix out(features.rows(), features.cols());
  for (std::size_t r = 0; r < features.rows(); ++r) {
    const auto f = features.row(r);
    auto z = out.row(r);
    switch (map.space.kind()) {
      case SpaceKind::EuclideanSquared:
        std::copy(f.begin(), f.end(), z.begin());
        break;
      case SpaceKind::PoincareBall: {
        BallChain b = ball_chain(map, f);
        if (b.was_capped) b.exp = fixed_radius_rescale(b.exp, map.space.effective_radius());
        std::copy(b.exp.begin(), b.exp.end(), z.begin());
        break;
      }
      case SpaceKind::FixedRadiusSphere: {
        const double s = map.space.radius() / (std::sqrt(kernels::squared_norm(f)) + map.norm_epsilon);
        if (!std::isfinite(s)) throw DegenerateInputError("zero feature vector on the sphere");
        std::transform(f.begin(), f.end(), z.begin(), [s](double x) { return s * x; });
        break;
      }
    }
  }
  return out;
}

Matrix embed_backward(const EmbeddingMap& map, const Matrix& features, const Matrix& grad_embeddings) {
  if (grad_embeddings.rows() != features.rows() || grad_embeddings.cols() != features.cols()) {
    throw DimensionError("embedding gradient has the wrong shape");
  }
  Matrix out = grad_embeddings;
  for (std::size_t r = 0; r < features.rows(); ++r) {
    const auto f = features.row(r);
    auto g = out.row(r);
    switch (map.space.kind()) {
      case SpaceKind::EuclideanSquared:
        break;
      case SpaceKind::PoincareBall: {
        const BallChain b = ball_chain(map, f);
        if (b.was_capped) radial_projection_vjp(b.exp, map.space.effective_radius(), g);
        exp0_vjp(b.clipped, map.space.k(), g);
        if (b.was_clipped) radial_projection_vjp(f, *map.clip.max_norm, g);
        break;
      }
      case SpaceKind::FixedRadiusSphere: {
        // z = r f/(n+e), so dz/df = r/(n+e) (I - f f^T/(n(n+e))).
        const double n = std::sqrt(kernels::squared_norm(f));
        const double m = n + map.norm_epsilon;
        if (!(m > 0.0)) throw DegenerateInputError("zero feature vector on the sphere");
        if (n > 0.0) kernels::axpy(-kernels::dot(f, g) / (n * m), f, g);
        kernels::scale(map.space.radius() / m, g);
        break;
      }
    }
  }
  return out;
}

Matrix encode(const EncoderParams& params, const Matrix& inputs, const EmbeddingMap& map) {
  return embed(map, encoder_forward(params, inputs));
}

}  // namespace hyperproto
