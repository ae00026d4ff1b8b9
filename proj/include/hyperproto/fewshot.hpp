#pragma once

// Episodic training and evaluation of prototypical classifiers on the
// synthetic hierarchy, with the radius statistics used to study saturation.

#include <cstdint>
#include <string>
#include <vector>

#include "hyperproto/encoder.hpp"
#include "hyperproto/hierarchy.hpp"
#include "hyperproto/protoloss.hpp"

namespace hyperproto {

struct EpisodeShape {
  int way = 5;
  int shot = 1;
  int queries = 15;
};

struct ExperimentConfig {
  CurvatureSpace space = CurvatureSpace::poincare_ball(-0.05);
  int d = 128;
  ClipConfig clip;
  /// Norm offset used when rescaling features onto the sphere.
  double norm_epsilon = 1e-12;
  GradientMode gradient_mode = GradientMode::EuclideanBackprop;
  EpisodeShape train_episode;
  EpisodeShape test_episode;
  long episodes = 200;
  double lr = 1e-3;
  long lr_step = 40;
  double lr_gamma = 0.8;
  AdamSettings adam;
  HierarchySpec hierarchy;
  int hidden_dim = 64;
  long eval_episodes = 600;
  std::uint64_t seed = 0;
  PrototypeOptions prototypes;
  /// Backpropagate through the class centroids into the support embeddings.
  bool prototype_gradients = true;
  /// Evaluation worker threads; 0 picks the hardware concurrency.
  int threads = 0;

  /// Cross-field checks; throws ConfigError naming the field.
  void validate() const;
  EncoderShape encoder_shape() const;
  EmbeddingMap embedding_map() const;
  /// lr * lr_gamma^floor(episode / lr_step).
  double learning_rate_at(long episode) const;
};

/// Initial encoder weights for a config (seeded from its own stream).
EncoderParams initial_params(const ExperimentConfig& config);

struct TrainingResult {
  EncoderParams params;
  std::vector<double> losses;  // mean query loss per episode
};

/// Episodic training from initial_params(config). TrainingError with the
/// episode index when the loss or a gradient stops being finite.
TrainingResult train(const ExperimentConfig& config, const SyntheticDataset& data);
TrainingResult train(const ExperimentConfig& config);

/// Mean query loss of `params` on one episode; no parameter update.
double episode_loss(const EncoderParams& params, const ExperimentConfig& config, const Episode& episode);

struct RunReport {
  std::string space;
  int d = 0;
  /// k for the Poincare ball, r for the sphere, 0 for Euclidean.
  double param = 0.0;
  std::uint64_t seed = 0;
  double test_acc = 0.0;
  double ci95 = 0.0;
  double r_min = 0.0;
  double r_avg = 0.0;
  double r_max = 0.0;
  long episodes = 0;
  double seconds = 0.0;
};

/// Nearest-prototype accuracy over `n_episodes` test episodes drawn from the
/// held-out classes. Episodes run in parallel; results do not depend on the
/// thread count.
RunReport evaluate(const EncoderParams& params, const ExperimentConfig& config, const SyntheticDataset& data,
                   long n_episodes);

/// Generates the data, trains, evaluates and times the whole run.
RunReport run_experiment(const ExperimentConfig& config);

/// Radius cap reached by embeddings: the smaller of the clipped radius (when
/// clipping) and the effective radius.
double saturation_cap(const CurvatureSpace& space, const ClipConfig& clip);
/// r_avg / saturation_cap, clamped to [0, 1]. DomainError unless Poincare.
double saturation_metric(const RunReport& report, const CurvatureSpace& space, const ClipConfig& clip);

}  // namespace hyperproto
