#include <cmath>
#include <vector>

#include <doctest.h>

#include "feedloop/enumeration.hpp"
#include "feedloop/estimators.hpp"
#include "feedloop/rng.hpp"

using namespace feedloop;

namespace {

LatentParams scalar_params(int users, int items, double user_val,
                           double item_val, double noise) {
  LatentParams p;
  p.user_vectors = Mat::Constant(users, 1, user_val);
  p.item_vectors = Mat::Constant(items, 1, item_val);
  p.noise_variance = noise;
  return p;
}

double gaussian_log_density(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * std::log(2.0 * M_PI * variance) - 0.5 * d * d / variance;
}

}  // namespace

TEST_CASE("one-step objective is the sum of per-pair expected likelihoods") {
  TinyWorld world;
  world.users = 1;
  world.items = 3;
  world.support = {{0.2, 0.8}, {0.5}, {0.4, 0.9}};
  world.probs = {{0.3, 0.7}, {1.0}, {0.5, 0.5}};
  world.validate();
  const LatentParams params = scalar_params(1, 3, 0.7, 0.8, 1.0);

  // At horizon 1 there is no history for the policy to react to, so the
  // objective is just sum_p E_R[log N(R; prediction_p)] regardless of the
  // policy's exposure marginals.
  double expected = 0.0;
  for (int p = 0; p < 3; ++p)
    expected += world.expected_log_likelihood(params, p);

  const double via_member = [&] {
    double acc = 0.0;
    for (int p = 0; p < 3; ++p)
      for (std::size_t v = 0; v < world.support[p].size(); ++v)
        acc += world.probs[p][v] *
               gaussian_log_density(world.support[p][v], 0.7 * 0.8, 1.0);
    return acc;
  }();
  CHECK(expected == doctest::Approx(via_member).epsilon(1e-13));

  for (const TinyPolicy& policy :
       {tiny_uniform_remaining(), tiny_feedback_remaining(1.0)}) {
    const double oracle = exact_causal_objective(world, policy, params, 1);
    CHECK(oracle == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("point-mass ratings give a closed-form objective") {
  // Deterministic ratings and a stationary law: every step's term for pair
  // p is the same constant, so the objective is horizon * sum_p ll_p.
  TinyWorld world;
  world.users = 1;
  world.items = 2;
  world.support = {{0.3}, {0.9}};
  world.probs = {{1.0}, {1.0}};
  const LatentParams params = scalar_params(1, 2, 0.5, 1.0, 0.8);

  const double ll0 = gaussian_log_density(0.3, 0.5, 0.8);
  const double ll1 = gaussian_log_density(0.9, 0.5, 0.8);
  for (int t : {1, 2}) {
    const double oracle =
        exact_causal_objective(world, tiny_uniform_remaining(), params, t);
    CHECK(oracle == doctest::Approx(t * (ll0 + ll1)).epsilon(1e-12));
  }
}

TEST_CASE("corrected estimators are exactly unbiased on random instances") {
  SeededRng rng(20240601, 0);
  for (int k = 0; k < 3; ++k) {
    TinyInstance inst = random_tiny_instance(rng, /*no_repeat=*/true);
    const double oracle = exact_causal_objective(inst.world, inst.policy,
                                                 inst.params, inst.horizon);
    for (WeightScheme scheme :
         {WeightScheme::cafl_special, WeightScheme::cafl_general}) {
      const double expectation = expected_estimator_value(
          scheme, inst.world, inst.policy, inst.params, inst.horizon);
      CHECK(std::abs(expectation - oracle) <= 1e-10);
    }
  }
  for (int k = 0; k < 3; ++k) {
    TinyInstance inst = random_tiny_instance(rng, /*no_repeat=*/false);
    const double oracle = exact_causal_objective(inst.world, inst.policy,
                                                 inst.params, inst.horizon);
    const double expectation = expected_estimator_value(
        WeightScheme::ipw, inst.world, inst.policy, inst.params, inst.horizon);
    CHECK(std::abs(expectation - oracle) <= 1e-10);
  }
}

TEST_CASE("the unweighted estimator is visibly biased under feedback") {
  // Three pairs with very different deterministic ratings and a strongly
  // rating-seeking policy: what gets re-shown depends on what was seen, and
  // pooling the log gives a skewed picture of the objective.
  TinyWorld world;
  world.users = 1;
  world.items = 3;
  world.support = {{0.9}, {0.5}, {0.1}};
  world.probs = {{1.0}, {1.0}, {1.0}};
  const LatentParams params = scalar_params(1, 3, 0.7, 1.0, 1.0);
  const TinyPolicy policy = tiny_feedback_remaining(4.0);

  const double oracle = exact_causal_objective(world, policy, params, 2);
  const double naive = expected_estimator_value(WeightScheme::naive, world,
                                                policy, params, 2);
  CHECK(std::abs(naive - oracle) > 1e-3);

  // The corrected scheme fixes exactly this gap on the same instance.
  const double corrected = expected_estimator_value(
      WeightScheme::cafl_special, world, policy, params, 2);
  CHECK(std::abs(corrected - oracle) <= 1e-10);
}

TEST_CASE("uniform-over-remaining propensities equalize per-term weights") {
  TinyWorld world;
  world.users = 2;
  world.items = 3;
  world.support = {{0.2, 0.6}, {0.5}, {0.3, 0.7}, {0.8}, {0.4}, {0.9, 0.95}};
  world.probs = {{0.4, 0.6}, {1.0}, {0.5, 0.5}, {1.0}, {1.0}, {0.25, 0.75}};
  world.validate();

  const Mat weights = expected_per_term_weight(
      WeightScheme::cafl_special, world, tiny_uniform_remaining(), 3);
  REQUIRE(weights.rows() == 3);
  REQUIRE(weights.cols() == 6);
  for (int s = 0; s < weights.rows(); ++s) {
    const double row_mean = weights.row(s).mean();
    for (int p = 0; p < weights.cols(); ++p)
      CHECK(std::abs(weights(s, p) - row_mean) <= 1e-10 * std::abs(row_mean));
  }
}

TEST_CASE("random verification instances respect the advertised regime") {
  SeededRng rng(7, 0);
  for (int k = 0; k < 50; ++k) {
    const bool no_repeat = (k % 2 == 0);
    TinyInstance inst = random_tiny_instance(rng, no_repeat);
    inst.world.validate();
    CHECK(inst.policy.no_repeat == no_repeat);
    CHECK(inst.horizon >= 1);
    CHECK(inst.horizon <= 3);
    if (no_repeat) CHECK(inst.horizon < inst.world.pairs());
    // The policy's step-1 distribution is proper and strictly positive on
    // every pair, as the unbiasedness regimes require.
    const Vec d = inst.policy.distribution(inst.world, {});
    REQUIRE(d.size() == inst.world.pairs());
    CHECK(std::abs(d.sum() - 1.0) <= 1e-12);
    CHECK(d.minCoeff() > 0.0);
  }
}

TEST_CASE("oracle size limits are enforced") {
  TinyWorld too_many;
  too_many.users = 2;
  too_many.items = 4;  // 8 pairs > limit 6
  too_many.support.assign(8, {0.5});
  too_many.probs.assign(8, {1.0});
  CHECK_THROWS_AS(too_many.validate(), std::invalid_argument);

  TinyWorld world;
  world.users = 1;
  world.items = 2;
  world.support = {{0.3}, {0.9}};
  world.probs = {{1.0}, {1.0}};
  const LatentParams params = scalar_params(1, 2, 0.5, 1.0, 0.8);
  CHECK_THROWS_AS((void)exact_causal_objective(
                      world, tiny_uniform_remaining(), params, 4),
                  std::invalid_argument);

  TinyWorld bad_probs = world;
  bad_probs.probs = {{0.5}, {1.0}};  // does not sum to 1
  CHECK_THROWS_AS(bad_probs.validate(), std::invalid_argument);
}

TEST_CASE("the bundled audit suite passes end to end") {
  const auto checks = oracle_suite(5, 424242);
  REQUIRE(checks.size() >= 6);
  for (const OracleCheck& c : checks) {
    INFO(c.name, ": ", c.detail);
    CHECK(c.pass);
  }
}
