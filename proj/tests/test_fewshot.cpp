#include <doctest.h>

#include <cmath>
#include <set>

#include "hyperproto/errors.hpp"
#include "hyperproto/fewshot.hpp"
#include "hyperproto/hierarchy.hpp"

using namespace hyperproto;

namespace {

ExperimentConfig small_config(const CurvatureSpace& space) {
  ExperimentConfig c;
  c.space = space;
  c.d = 16;
  c.episodes = 20;
  c.eval_episodes = 40;
  c.hidden_dim = 16;
  c.hierarchy.input_dim = 12;
  c.threads = 1;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("hierarchy generation") {
  HierarchySpec spec;
  spec.branching = 2;
  spec.depth = 1;
  spec.input_dim = 3;
  CHECK(generate_hierarchy(spec).rows() == 2);
  spec = HierarchySpec{};
  const Matrix a = generate_hierarchy(spec);
  CHECK(a.rows() == 25);
  CHECK(a.cols() == 64);
  CHECK(a == generate_hierarchy(spec));
  spec.seed = 1;
  CHECK_FALSE(a == generate_hierarchy(spec));
  spec.branching = 1;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("sibling leaves share their ancestors' offsets") {
  // With depth 2 and node_scale s, siblings have covariance s^2 per
  // coordinate and cousins none; each leaf coordinate has variance 2 s^2.
  HierarchySpec spec{3, 2, 2, 1.0, 1.0, 0};
  double sib = 0, cousin = 0, var = 0;
  const int n = 10000;
  for (int s = 0; s < n; ++s) {
    spec.seed = static_cast<std::uint64_t>(s);
    const Matrix m = generate_hierarchy(spec);
    sib += m(0, 0) * m(1, 0);
    cousin += m(0, 0) * m(3, 0);
    var += m(0, 0) * m(0, 0);
  }
  CHECK(sib / n == doctest::Approx(1.0).epsilon(0.1));
  CHECK(std::abs(cousin / n) < 0.1);
  CHECK(var / n == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("class splits and episodes") {
  const SyntheticDataset data(HierarchySpec{});
  CHECK(data.classes(Split::Train).size() == 15);
  CHECK(data.classes(Split::Validation).size() == 5);
  CHECK(data.classes(Split::Test).size() == 5);
  CHECK(data.classes(Split::Test)[0] == 20);

  Rng rng(1);
  const Episode e = sample_episode(data, Split::Train, 5, 1, 15, rng);
  CHECK(e.support.rows() == 5);
  CHECK(e.query.rows() == 75);
  const Episode f = sample_episode(data, Split::Train, 5, 5, 3, rng);
  CHECK(f.support.rows() == 25);
  std::vector<int> counts(5, 0);
  for (int l : f.support_labels) ++counts[l];
  for (int c : counts) CHECK(c == 5);
  std::set<int> distinct(f.classes.begin(), f.classes.end());
  CHECK(distinct.size() == 5);
  for (int c : f.classes) CHECK(c < 15);

  Rng r1(9), r2(9);
  CHECK(sample_episode(data, Split::Test, 3, 2, 2, r1).query == sample_episode(data, Split::Test, 3, 2, 2, r2).query);
  CHECK_THROWS_AS(sample_episode(data, Split::Test, 6, 1, 1, rng), ConfigError);
  CHECK_THROWS_AS(sample_episode(data, Split::Test, 5, 0, 1, rng), ConfigError);
}

TEST_CASE("config validation") {
  ExperimentConfig c;
  CHECK_NOTHROW(c.validate());
  c.clip = ClipConfig{2.0};
  c.space = CurvatureSpace::euclidean_squared();
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.clip = {};
  c.gradient_mode = GradientMode::RiemannianScaled;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ExperimentConfig{};
  c.test_episode.way = 6;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ExperimentConfig{};
  CHECK(c.learning_rate_at(0) == 1e-3);
  CHECK(c.learning_rate_at(39) == 1e-3);
  CHECK(c.learning_rate_at(80) == doctest::Approx(1e-3 * 0.64));
}

TEST_CASE("training is deterministic and zero episodes keep the initial weights") {
  for (const auto& space : {CurvatureSpace::euclidean_squared(), CurvatureSpace::poincare_ball(-0.05),
                            CurvatureSpace::fixed_radius_sphere(12.909944487358056)}) {
    CAPTURE(space.describe());
    ExperimentConfig c = small_config(space);
    const auto a = train(c);
    const auto b = train(c);
    CHECK(a.losses == b.losses);
    CHECK(a.params == b.params);
    CHECK(a.losses.size() == 20);
    c.episodes = 0;
    CHECK(train(c).params == initial_params(c));
  }
}

TEST_CASE("training lowers the loss on a fixed episode") {
  for (const auto& space : {CurvatureSpace::euclidean_squared(), CurvatureSpace::poincare_ball(-0.05),
                            CurvatureSpace::fixed_radius_sphere(12.909944487358056)}) {
    CAPTURE(space.describe());
    ExperimentConfig c;
    c.space = space;
    c.threads = 1;
    const SyntheticDataset data(HierarchySpec{.seed = c.seed});
    Rng rng(derive_seed(99, 4));
    const Episode fixed = sample_episode(data, Split::Train, 5, 1, 15, rng);
    const double before = episode_loss(initial_params(c), c, fixed);
    const double after = episode_loss(train(c, data).params, c, fixed);
    CHECK(after < before);
  }
}

TEST_CASE("riemannian and detached-prototype training run") {
  ExperimentConfig c = small_config(CurvatureSpace::poincare_ball(-0.05));
  c.gradient_mode = GradientMode::RiemannianScaled;
  CHECK(train(c).losses.size() == 20);
  c.prototype_gradients = false;
  c.clip = ClipConfig{3.0};
  CHECK(train(c).losses.size() == 20);
}

TEST_CASE("divergence is reported with the episode index") {
  ExperimentConfig c = small_config(CurvatureSpace::euclidean_squared());
  c.lr = 1e200;
  try {
    train(c);
    FAIL("expected a training error");
  } catch (const TrainingError& e) {
    CHECK(e.episode() >= 0);
  }
}

TEST_CASE("evaluation reports") {
  const ExperimentConfig c = small_config(CurvatureSpace::fixed_radius_sphere(12.909944487358056));
  const SyntheticDataset data(HierarchySpec{c.hierarchy.branching, c.hierarchy.depth, c.hierarchy.input_dim,
                                            c.hierarchy.node_scale, c.hierarchy.noise_scale, c.seed});
  const auto params = initial_params(c);
  const RunReport r = evaluate(params, c, data, 30);
  CHECK(r.r_min == doctest::Approx(12.909944487358056).epsilon(1e-12));
  CHECK(r.r_max == doctest::Approx(12.909944487358056).epsilon(1e-12));
  CHECK(r.r_avg == doctest::Approx(12.909944487358056).epsilon(1e-12));
  CHECK(r.test_acc >= 0.0);
  CHECK(r.test_acc <= 1.0);
  CHECK(r.ci95 >= 0.0);
  CHECK(r.space == "sphere");

  // Thread count does not change the result.
  ExperimentConfig many = c;
  many.threads = 4;
  const RunReport r4 = evaluate(params, many, data, 30);
  CHECK(r4.test_acc == r.test_acc);
  CHECK(r4.ci95 == r.ci95);
  CHECK(r4.r_avg == r.r_avg);
}

TEST_CASE("poincare reports respect the radius caps") {
  ExperimentConfig c = small_config(CurvatureSpace::poincare_ball(-0.05));
  RunReport r = run_experiment(c);
  CHECK(r.r_min <= r.r_avg);
  CHECK(r.r_avg <= r.r_max);
  CHECK(r.r_max <= c.space.effective_radius() * (1 + 1e-15));
  c.clip = ClipConfig{2.0};
  r = run_experiment(c);
  CHECK(r.r_max <= clipped_radius(2.0, -0.05) * (1 + 1e-15));
  CHECK(saturation_cap(c.space, c.clip) == doctest::Approx(clipped_radius(2.0, -0.05)));
}

TEST_CASE("saturation metric") {
  RunReport r;
  const auto ball = CurvatureSpace::poincare_ball(-0.05);
  r.r_avg = ball.effective_radius();
  CHECK(saturation_metric(r, ball, {}) == 1.0);
  r.r_avg = 4.47;  // rounded table value slightly above the cap
  CHECK(saturation_metric(r, ball, {}) == 1.0);
  r.r_avg = 5.85;
  CHECK(saturation_metric(r, CurvatureSpace::poincare_ball(-0.005), {}) == doctest::Approx(0.41407).epsilon(1e-4));
  CHECK_THROWS_AS(saturation_metric(r, CurvatureSpace::euclidean_squared(), {}), DomainError);
}
