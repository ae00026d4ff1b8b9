#include "hyperproto/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "hyperproto/errors.hpp"

namespace hyperproto {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr long kMaxClasses = 1L << 20;

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return splitmix(splitmix(splitmix(seed) ^ stream) ^ index);
}

void HierarchySpec::validate() const {
  if (branching < 2) throw ConfigError("branching", "must be at least 2");
  if (depth < 1) throw ConfigError("depth", "must be at least 1");
  if (input_dim < 1) throw ConfigError("input_dim", "must be positive");
  if (!(node_scale > 0.0) || !std::isfinite(node_scale)) throw ConfigError("node_scale", "must be positive and finite");
  if (!(noise_scale > 0.0) || !std::isfinite(noise_scale)) {
    throw ConfigError("noise_scale", "must be positive and finite");
  }
  long leaves = 1;
  for (int i = 0; i < depth; ++i) {
    leaves *= branching;
    if (leaves > kMaxClasses) throw ConfigError("depth", "tree has too many leaves");
  }
}

int HierarchySpec::num_classes() const {
  validate();
  int n = 1;
  for (int i = 0; i < depth; ++i) n *= branching;
  return n;
}

Matrix generate_hierarchy(const HierarchySpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, 0x68696572ULL));
  std::normal_distribution<double> normal(0.0, spec.node_scale);
  const auto dim = static_cast<std::size_t>(spec.input_dim);

  // Breadth-first over levels: every node at level l+1 is its parent's mean
  // plus a fresh offset. Children of node i at a level are b*i .. b*i+b-1, so
  // the last level comes out in depth-first leaf order.
  Matrix level(1, dim);
  for (int l = 0; l < spec.depth; ++l) {
    Matrix next(level.rows() * spec.branching, dim);
    for (std::size_t p = 0; p < level.rows(); ++p) {
      for (int b = 0; b < spec.branching; ++b) {
        auto child = next.row(p * spec.branching + b);
        const auto parent = level.row(p);
        for (std::size_t j = 0; j < dim; ++j) child[j] = parent[j] + normal(rng);
      }
    }
    level = std::move(next);
  }
  return level;
}

SyntheticDataset::SyntheticDataset(const HierarchySpec& spec) : spec_(spec), means_(generate_hierarchy(spec)) {
  const int n = num_classes();
  const int n_test = std::max(1, static_cast<int>(std::lround(0.2 * n)));
  const int n_val = std::min(n - n_test, static_cast<int>(std::lround(0.2 * n)));
  const int n_train = n - n_test - n_val;
  train_.resize(n_train);
  validation_.resize(n_val);
  test_.resize(n_test);
  std::iota(train_.begin(), train_.end(), 0);
  std::iota(validation_.begin(), validation_.end(), n_train);
  std::iota(test_.begin(), test_.end(), n_train + n_val);
}

std::span<const int> SyntheticDataset::classes(Split split) const {
  switch (split) {
    case Split::Train: return train_;
    case Split::Validation: return validation_;
    case Split::Test: return test_;
  }
  return {};
}

void SyntheticDataset::draw_sample(int cls, Rng& rng, std::span<double> out) const {
  std::normal_distribution<double> noise(0.0, spec_.noise_scale);
  const auto mean = means_.row(static_cast<std::size_t>(cls));
  for (std::size_t j = 0; j < mean.size(); ++j) out[j] = mean[j] + noise(rng);
}

Episode sample_episode(const SyntheticDataset& data, Split split, int way, int shot, int queries_per_class,
                       Rng& rng) {
  if (way < 2) throw ConfigError("way", "episodes need at least 2 classes");
  if (shot < 1) throw ConfigError("shot", "must be at least 1");
  if (queries_per_class < 1) throw ConfigError("queries", "must be at least 1");
  const auto pool = data.classes(split);
  if (pool.size() < static_cast<std::size_t>(way)) {
    throw ConfigError("way", "split has " + std::to_string(pool.size()) + " classes, episode needs " +
                                 std::to_string(way));
  }

  // Partial Fisher-Yates over a copy of the split.
  std::vector<int> order(pool.begin(), pool.end());
  for (int i = 0; i < way; ++i) {
    std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), order.size() - 1);
    std::swap(order[i], order[pick(rng)]);
  }

  const auto dim = static_cast<std::size_t>(data.input_dim());
  Episode ep;
  ep.way = way;
  ep.shot = shot;
  ep.queries_per_class = queries_per_class;
  ep.classes.assign(order.begin(), order.begin() + way);
  ep.support = Matrix(static_cast<std::size_t>(way) * shot, dim);
  ep.query = Matrix(static_cast<std::size_t>(way) * queries_per_class, dim);
  ep.support_labels.reserve(ep.support.rows());
  ep.query_labels.reserve(ep.query.rows());
  std::size_t s = 0;
  std::size_t q = 0;
  for (int c = 0; c < way; ++c) {
    for (int i = 0; i < shot; ++i) {
      data.draw_sample(ep.classes[c], rng, ep.support.row(s++));
      ep.support_labels.push_back(c);
    }
    for (int i = 0; i < queries_per_class; ++i) {
      data.draw_sample(ep.classes[c], rng, ep.query.row(q++));
      ep.query_labels.push_back(c);
    }
  }
  return ep;
}

}  // namespace hyperproto
