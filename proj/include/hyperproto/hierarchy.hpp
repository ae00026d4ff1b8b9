#pragma once

// Synthetic hierarchical classification data: a random tree whose leaves are
// classes, with Gaussian samples around each leaf mean, and episodic sampling
// from disjoint class splits.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "hyperproto/matrix.hpp"

namespace hyperproto {

/// Deterministic 64-bit stream derivation (SplitMix64 finaliser over the
/// inputs), used to give every consumer of randomness its own generator.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0);

using Rng = std::mt19937_64;

struct HierarchySpec {
  int branching = 5;
  int depth = 2;
  int input_dim = 64;
  double node_scale = 1.0;
  double noise_scale = 1.6;
  std::uint64_t seed = 0;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  int num_classes() const;
};

/// Leaf class means in depth-first leaf order. Each non-root node carries an
/// isotropic N(0, node_scale^2) offset; a leaf mean is the sum along its path.
Matrix generate_hierarchy(const HierarchySpec& spec);

enum class Split { Train, Validation, Test };

/// Class means plus the block split of leaf indices (60/20/20, test and
/// validation rounded, at least one test class).
class SyntheticDataset {
 public:
  explicit SyntheticDataset(const HierarchySpec& spec);

  const HierarchySpec& spec() const noexcept { return spec_; }
  const Matrix& class_means() const noexcept { return means_; }
  std::span<const int> classes(Split split) const;
  int num_classes() const noexcept { return static_cast<int>(means_.rows()); }
  int input_dim() const noexcept { return static_cast<int>(means_.cols()); }

  /// mean_c + N(0, noise_scale^2) in every coordinate, written into `out`.
  void draw_sample(int cls, Rng& rng, std::span<double> out) const;

 private:
  HierarchySpec spec_;
  Matrix means_;
  std::vector<int> train_, validation_, test_;
};

struct Episode {
  int way = 0;
  int shot = 0;
  int queries_per_class = 0;
  Matrix support;
  std::vector<int> support_labels;
  Matrix query;
  std::vector<int> query_labels;
  /// Dataset class index behind each episode label.
  std::vector<int> classes;
};

/// `way` distinct classes drawn uniformly from the split, then `shot` support
/// and `queries_per_class` query samples per class. ConfigError when the split
/// has fewer than `way` classes or a size is out of range.
Episode sample_episode(const SyntheticDataset& data, Split split, int way, int shot, int queries_per_class,
                       Rng& rng);

}  // namespace hyperproto
