#include "hyperproto/fewshot.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include "hyperproto/errors.hpp"
#include "hyperproto/kernels.hpp"

namespace hyperproto {

namespace {

enum Stream : std::uint64_t { kInitStream = 1, kTrainStream = 2, kEvalStream = 3 };

void validate_episode(const EpisodeShape& e, const std::string& prefix) {
  if (e.way < 2) throw ConfigError(prefix + "_way", "must be at least 2");
  if (e.shot < 1) throw ConfigError(prefix + "_shot", "must be at least 1");
  if (e.queries < 1) throw ConfigError(prefix + "_queries", "must be at least 1");
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

HierarchySpec data_spec(const ExperimentConfig& config) {
  HierarchySpec spec = config.hierarchy;
  spec.seed = config.seed;
  return spec;
}

// Nudges queries that coincide exactly with a prototype, where the distance
// gradient is singular.
void separate_collisions(const PrototypeSet& protos, Matrix& queries) {
  for (std::size_t i = 0; i < queries.rows(); ++i) {
    auto z = queries.row(i);
    for (std::size_t j = 0; j < protos.size(); ++j) {
      if (kernels::squared_distance(z, protos.centroids().row(j)) == 0.0) {
        z[0] += z[0] > 0.0 ? -1e-9 : 1e-9;
        break;
      }
    }
  }
}

struct EpisodeState {
  ForwardCache support_cache;
  ForwardCache query_cache;
  Matrix support_features;
  Matrix query_features;
  Matrix support;
  Matrix query;
};

EpisodeState forward_episode(const EncoderParams& params, const EmbeddingMap& map, const Episode& ep) {
  EpisodeState s;
  s.support_features = encoder_forward(params, ep.support, &s.support_cache);
  s.query_features = encoder_forward(params, ep.query, &s.query_cache);
  s.support = embed(map, s.support_features);
  s.query = embed(map, s.query_features);
  return s;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (d < 1) throw ConfigError("d", "must be positive");
  if (clip.max_norm) {
    if (!space.is_poincare()) throw ConfigError("clip", "clipping applies to the poincare space only");
    if (!(*clip.max_norm > 0.0) || !std::isfinite(*clip.max_norm)) throw ConfigError("clip", "must be positive");
  }
  if (gradient_mode == GradientMode::RiemannianScaled && !space.is_poincare()) {
    throw ConfigError("gradient_mode", "riemannian scaling applies to the poincare space only");
  }
  validate_episode(train_episode, "train");
  validate_episode(test_episode, "test");
  if (episodes < 0) throw ConfigError("episodes", "must be nonnegative");
  if (!(norm_epsilon >= 0.0) || !std::isfinite(norm_epsilon)) {
    throw ConfigError("norm_epsilon", "must be finite and non-negative");
  }
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr", "must be positive");
  if (lr_step < 1) throw ConfigError("lr_step", "must be at least 1");
  if (!(lr_gamma > 0.0 && lr_gamma <= 1.0)) throw ConfigError("lr_gamma", "must lie in (0, 1]");
  if (hidden_dim < 1) throw ConfigError("hidden_dim", "must be positive");
  if (eval_episodes < 1) throw ConfigError("eval_episodes", "must be at least 1");
  if (threads < 0) throw ConfigError("threads", "must be nonnegative");
  hierarchy.validate();
  const SyntheticDataset probe(data_spec(*this));
  const auto n_train = probe.classes(Split::Train).size();
  const auto n_test = probe.classes(Split::Test).size();
  if (n_train < static_cast<std::size_t>(train_episode.way)) {
    throw ConfigError("train_way", "only " + std::to_string(n_train) + " training classes");
  }
  if (n_test < static_cast<std::size_t>(test_episode.way)) {
    throw ConfigError("test_way", "only " + std::to_string(n_test) + " test classes");
  }
}

EncoderShape ExperimentConfig::encoder_shape() const { return {hierarchy.input_dim, hidden_dim, d}; }

EmbeddingMap ExperimentConfig::embedding_map() const { return {space, clip, norm_epsilon}; }

double ExperimentConfig::learning_rate_at(long episode) const {
  return lr * std::pow(lr_gamma, static_cast<double>(episode / lr_step));
}

EncoderParams initial_params(const ExperimentConfig& config) {
  return EncoderParams(config.encoder_shape(), derive_seed(config.seed, kInitStream));
}

double episode_loss(const EncoderParams& params, const ExperimentConfig& config, const Episode& episode) {
  const EmbeddingMap map = config.embedding_map();
  const EpisodeState s = forward_episode(params, map, episode);
  const PrototypeSet protos = compute_prototypes(config.space, s.support, episode.support_labels, episode.way,
                                                 config.prototypes);
  return prototypical_loss(protos, s.query, episode.query_labels) / static_cast<double>(s.query.rows());
}

TrainingResult train(const ExperimentConfig& config) { return train(config, SyntheticDataset(data_spec(config))); }

TrainingResult train(const ExperimentConfig& config, const SyntheticDataset& data) {
  config.validate();
  TrainingResult result{initial_params(config), {}};
  result.losses.reserve(static_cast<std::size_t>(config.episodes));
  EncoderParams& params = result.params;
  const EmbeddingMap map = config.embedding_map();
  const auto& shape = config.train_episode;
  Rng rng(derive_seed(config.seed, kTrainStream));

  for (long ep = 0; ep < config.episodes; ++ep) {
    const Episode episode = sample_episode(data, Split::Train, shape.way, shape.shot, shape.queries, rng);
    try {
      EpisodeState s = forward_episode(params, map, episode);
      const PrototypeSet protos =
          compute_prototypes(config.space, s.support, episode.support_labels, episode.way, config.prototypes);
      separate_collisions(protos, s.query);

      LossGradients g = loss_and_gradients(protos, s.query, episode.query_labels);
      const double inv_n = 1.0 / static_cast<double>(s.query.rows());
      const double loss = g.loss * inv_n;
      if (!std::isfinite(loss)) throw TrainingError("loss is not finite", ep);
      kernels::scale(inv_n, g.queries.data());
      kernels::scale(inv_n, g.prototypes.data());

      Matrix grad_support(s.support.rows(), s.support.cols());
      if (config.prototype_gradients) {
        grad_support = prototypes_backward(config.space, s.support, episode.support_labels, episode.way,
                                           config.prototypes, g.prototypes);
      }
      if (config.gradient_mode == GradientMode::RiemannianScaled) {
        apply_riemannian_scaling(config.space.k(), s.query, g.queries);
        apply_riemannian_scaling(config.space.k(), s.support, grad_support);
      }

      params.zero_gradient();
      encoder_backward(params, s.query_cache, embed_backward(map, s.query_features, g.queries));
      if (config.prototype_gradients) {
        encoder_backward(params, s.support_cache, embed_backward(map, s.support_features, grad_support));
      }
      if (!all_finite(params.gradient())) throw TrainingError("gradient is not finite", ep);
      params.adam_step(config.learning_rate_at(ep), config.adam);
      if (!all_finite(params.values())) throw TrainingError("parameters are not finite", ep);
      result.losses.push_back(loss);
    } catch (const TrainingError&) {
      throw;
    } catch (const NumericError& e) {
      throw TrainingError(e.what(), ep);
    } catch (const DomainError& e) {
      throw TrainingError(e.what(), ep);
    }
  }
  return result;
}

namespace {

struct EpisodeOutcome {
  double accuracy = 0.0;
  double r_min = std::numeric_limits<double>::infinity();
  double r_max = 0.0;
  double r_sum = 0.0;
  std::size_t count = 0;
};

EpisodeOutcome evaluate_episode(const EncoderParams& params, const ExperimentConfig& config,
                                const SyntheticDataset& data, long index) {
  Rng rng(derive_seed(config.seed, kEvalStream, static_cast<std::uint64_t>(index)));
  const auto& shape = config.test_episode;
  const Episode ep = sample_episode(data, Split::Test, shape.way, shape.shot, shape.queries, rng);
  const EmbeddingMap map = config.embedding_map();
  const Matrix support = encode(params, ep.support, map);
  const Matrix query = encode(params, ep.query, map);
  const PrototypeSet protos = compute_prototypes(config.space, support, ep.support_labels, ep.way, config.prototypes);
  EpisodeOutcome out;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < query.rows(); ++i) {
    if (predict_class(protos, query.row(i)) == ep.query_labels[i]) ++correct;
    const double r = std::sqrt(kernels::squared_norm(query.row(i)));
    out.r_min = std::min(out.r_min, r);
    out.r_max = std::max(out.r_max, r);
    out.r_sum += r;
  }
  out.count = query.rows();
  out.accuracy = static_cast<double>(correct) / static_cast<double>(query.rows());
  return out;
}

}  // namespace

RunReport evaluate(const EncoderParams& params, const ExperimentConfig& config, const SyntheticDataset& data,
                   long n_episodes) {
  if (n_episodes < 1) throw ConfigError("eval_episodes", "must be at least 1");
  std::vector<EpisodeOutcome> outcomes(static_cast<std::size_t>(n_episodes));
  unsigned workers = config.threads > 0 ? static_cast<unsigned>(config.threads) : std::thread::hardware_concurrency();
  workers = std::clamp<unsigned>(workers, 1U, static_cast<unsigned>(n_episodes));

  std::vector<std::exception_ptr> failures(workers);
  auto work = [&](unsigned w) {
    try {
      for (long i = w; i < n_episodes; i += workers) outcomes[i] = evaluate_episode(params, config, data, i);
    } catch (...) {
      failures[w] = std::current_exception();
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  RunReport report;
  report.space = std::string(to_string(config.space.kind()));
  report.d = config.d;
  report.param = config.space.parameter();
  report.seed = config.seed;
  report.r_min = std::numeric_limits<double>::infinity();
  double acc_sum = 0.0;
  double r_sum = 0.0;
  std::size_t r_count = 0;
  for (const auto& o : outcomes) {
    acc_sum += o.accuracy;
    r_sum += o.r_sum;
    r_count += o.count;
    report.r_min = std::min(report.r_min, o.r_min);
    report.r_max = std::max(report.r_max, o.r_max);
  }
  const double n = static_cast<double>(n_episodes);
  report.test_acc = acc_sum / n;
  double ss = 0.0;
  for (const auto& o : outcomes) ss += (o.accuracy - report.test_acc) * (o.accuracy - report.test_acc);
  const double sd = n_episodes > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  report.ci95 = 1.96 * sd / std::sqrt(n);
  report.r_avg = std::clamp(r_sum / static_cast<double>(r_count), report.r_min, report.r_max);
  return report;
}

RunReport run_experiment(const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  config.validate();
  const SyntheticDataset data(data_spec(config));
  const TrainingResult trained = train(config, data);
  RunReport report = evaluate(trained.params, config, data, config.eval_episodes);
  report.episodes = config.episodes;
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

double saturation_cap(const CurvatureSpace& space, const ClipConfig& clip) {
  if (!space.is_poincare()) throw DomainError("saturation is defined for the poincare space only");
  const double r_eff = space.effective_radius();
  if (!clip.max_norm) return r_eff;
  return std::min(r_eff, clipped_radius(*clip.max_norm, space.k()));
}

double saturation_metric(const RunReport& report, const CurvatureSpace& space, const ClipConfig& clip) {
  return std::clamp(report.r_avg / saturation_cap(space, clip), 0.0, 1.0);
}

}  // namespace hyperproto
