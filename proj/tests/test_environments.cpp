#include <cmath>
#include <vector>

#include <doctest.h>

#include "feedloop/environments.hpp"
#include "feedloop/rng.hpp"
#include "feedloop/types.hpp"

using namespace feedloop;

namespace {

void record_single(InteractionHistory& h, int t, int u, int i, double rating,
                   double propensity) {
  RecommendationMatrix recs;
  recs.entries = BinaryMat::Zero(h.users(), h.items());
  recs.entries(u, i) = 1;
  recs.timestep = t;
  RatingMatrix ratings;
  ratings.entries = Mat::Zero(h.users(), h.items());
  ratings.entries(u, i) = rating;
  ratings.timestep = t;
  PropensityLog props;
  props.timestep = t;
  props.records.push_back(PropensityRecord{t, u, i, propensity});
  h.record_step(recs, ratings, props);
}

}  // namespace

TEST_CASE("beta shape parameters from mean and variance") {
  // Default mode: mean 0.5, variance spec 0.01 gives the (24, 24) shapes.
  auto [a, b] = beta_prime_params(BetaPrimeSpec{0.5, 0.01, false});
  CHECK(a == doctest::Approx(24.0).epsilon(1e-12));
  CHECK(b == doctest::Approx(24.0).epsilon(1e-12));

  // Mean 0.2: a = (0.8/0.01 - 5) * 0.2 = 15, b = 15 * 4 = 60.
  auto [a2, b2] = beta_prime_params(BetaPrimeSpec{0.2, 0.01, false});
  CHECK(a2 == doctest::Approx(15.0).epsilon(1e-12));
  CHECK(b2 == doctest::Approx(60.0).epsilon(1e-12));
  CHECK(a2 / (a2 + b2) == doctest::Approx(0.2).epsilon(1e-14));

  // No positive shapes exist when the variance is too large for the mean.
  CHECK_THROWS_WITH_AS((void)beta_prime_params(BetaPrimeSpec{0.5, 0.5, false}),
                       "beta_prime_params: variance too large for mean",
                       std::invalid_argument);
}

TEST_CASE("beta shapes: default mode hits the mean, audit mode both moments") {
  for (double mu : {0.1, 0.2, 0.5, 0.77}) {
    for (double var : {0.001, 0.005, 0.01}) {
      auto [a, b] = beta_prime_params(BetaPrimeSpec{mu, var, false});
      CHECK(a > 0.0);
      CHECK(b > 0.0);
      // The default parameterization always has mean exactly mu...
      CHECK(a / (a + b) == doctest::Approx(mu).epsilon(1e-12));
      // ...but its variance falls short of the requested value (e.g.
      // Beta(24,24) has variance 0.25/49 ~ 0.0051, not 0.01).
      const double realized = a * b / ((a + b) * (a + b) * (a + b + 1.0));
      CHECK(realized < var);

      // Opt-in moment-exact mode matches both moments analytically.
      auto [am, bm] = beta_prime_params(BetaPrimeSpec{mu, var, true});
      CHECK(am / (am + bm) == doctest::Approx(mu).epsilon(1e-12));
      const double exact =
          am * bm / ((am + bm) * (am + bm) * (am + bm + 1.0));
      CHECK(std::abs(exact - var) <= 1e-12);
    }
  }
}

TEST_CASE("topic environment construction invariants") {
  DirichletEnvConfig cfg;
  cfg.users = 20;
  cfg.items = 15;
  cfg.k = 5;
  DirichletEnv env(cfg, SeededRng(11, 0));

  for (int u = 0; u < cfg.users; ++u) {
    CHECK(env.user_topics().row(u).minCoeff() >= 0.0);
    CHECK(std::abs(env.user_topics().row(u).sum() - 1.0) < 1e-12);
  }
  for (int i = 0; i < cfg.items; ++i) {
    CHECK(env.item_topics().row(i).minCoeff() >= 0.0);
    CHECK(std::abs(env.item_topics().row(i).sum() - 1.0) < 1e-12);
  }
  CHECK(env.similarity().minCoeff() > 0.0);
  CHECK(env.similarity().maxCoeff() < 1.0);
  CHECK(env.top_k() == 2);  // ceil(0.1 * 15)

  // Identical construction seed reproduces the world bit-for-bit.
  DirichletEnv env2(cfg, SeededRng(11, 0));
  CHECK(env.user_topics() == env2.user_topics());
  CHECK(env.similarity() == env2.similarity());
}

TEST_CASE("topic ratings: support, determinism and Monte Carlo mean") {
  DirichletEnvConfig cfg;
  cfg.users = 4;
  cfg.items = 4;
  cfg.k = 3;
  DirichletEnv env(cfg, SeededRng(12, 0));

  SeededRng a(13, 0), b(13, 0);
  CHECK(env.sample_rating(1, 2, a) == env.sample_rating(1, 2, b));

  const int n = 100000;
  SeededRng rng(14, 0);
  double sum = 0.0, sum2 = 0.0;
  for (int k = 0; k < n; ++k) {
    const double r = env.sample_rating(2, 3, rng);
    CHECK(r > 0.0);
    CHECK(r < 1.0);
    sum += r;
    sum2 += r * r;
  }
  const double m = sum / n;
  const double sd = std::sqrt(sum2 / n - m * m);
  CHECK(std::abs(m - env.rating_mean(2, 3)) <= 3.0 * sd / std::sqrt(double(n)));
}

TEST_CASE("past-consumption affinity score") {
  DirichletEnvConfig cfg;
  cfg.users = 2;
  cfg.items = 6;
  cfg.k = 3;
  DirichletEnv env(cfg, SeededRng(15, 0));

  InteractionHistory h(2, 6, 1, true);
  for (int i = 0; i < cfg.items; ++i)
    CHECK(score_pan(env, h, 0, i) == 0.0);  // no history, no affinity

  // Single past interaction (item 4, rating 0.3): score is
  // rating * exp(similarity to the consumed item).
  record_single(h, 1, 0, 4, 0.3, 0.5);
  for (int i = 0; i < cfg.items; ++i) {
    const double expected = 0.3 * std::exp(env.similarity()(i, 4));
    CHECK(score_pan(env, h, 0, i) == doctest::Approx(expected).epsilon(1e-14));
  }
  // The other user's history is untouched.
  CHECK(score_pan(env, h, 1, 0) == 0.0);

  // Scores are linear in past ratings: doubling the rating doubles them.
  InteractionHistory h2(2, 6, 1, true);
  record_single(h2, 1, 0, 4, 0.6, 0.5);
  for (int i = 0; i < cfg.items; ++i)
    CHECK(score_pan(env, h2, 0, i) ==
          doctest::Approx(2.0 * score_pan(env, h, 0, i)).epsilon(1e-14));
}

TEST_CASE("exposure distribution: boost, exclusion of consumed, normalization") {
  DirichletEnvConfig cfg;
  cfg.users = 2;
  cfg.items = 10;
  cfg.k = 3;
  cfg.top_k = 2;
  DirichletEnv env(cfg, SeededRng(16, 0));

  // User 0 has no history, so every item ties at score 0 and the tie-break
  // boosts the two lowest item ids: weights {10, 10, 1, ..., 1} / 28.
  InteractionHistory h(2, 10, 1, true);
  record_single(h, 1, 1, 7, 0.4, 0.1);  // gives the history a first step
  const Vec p = exposure_probs_pan(env, h, 0);
  REQUIRE(p.size() == 10);
  CHECK(p[0] == doctest::Approx(10.0 / 28.0).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(10.0 / 28.0).epsilon(1e-14));
  for (int i = 2; i < 10; ++i)
    CHECK(p[i] == doctest::Approx(1.0 / 28.0).epsilon(1e-14));
  CHECK(std::abs(p.sum() - 1.0) <= 1e-12);

  // A consumed item gets probability exactly zero.
  const Vec p1 = exposure_probs_pan(env, h, 1);
  CHECK(p1[7] == 0.0);
  CHECK(std::abs(p1.sum() - 1.0) <= 1e-12);

  // All items consumed: no distribution exists.
  DirichletEnvConfig tiny;
  tiny.users = 1;
  tiny.items = 2;
  tiny.k = 2;
  tiny.top_k = 1;
  DirichletEnv tiny_env(tiny, SeededRng(17, 0));
  InteractionHistory ht(1, 2, 1, true);
  record_single(ht, 1, 0, 0, 0.5, 0.5);
  record_single(ht, 2, 0, 1, 0.5, 0.5);
  CHECK_THROWS_WITH_AS((void)exposure_probs_pan(tiny_env, ht, 0),
                       "exposure_probs_pan: user exhausted",
                       std::runtime_error);
}

TEST_CASE("linear-factor environment: clipping, noiseless mode, determinism") {
  LatentFactorEnvConfig cfg;
  cfg.users = 30;
  cfg.items = 30;
  cfg.k = 4;
  cfg.noise_variance = 0.0;
  LatentFactorEnv env(cfg, SeededRng(18, 0));

  SeededRng rng(19, 0);
  for (int u = 0; u < 5; ++u)
    for (int i = 0; i < 5; ++i) {
      // Zero noise: the sample is exactly the clipped mean.
      CHECK(env.sample_rating(u, i, rng) == env.true_rating(u, i));
      CHECK(env.true_rating(u, i) >= cfg.clip_lo);
      CHECK(env.true_rating(u, i) <= cfg.clip_hi);
    }

  LatentFactorEnvConfig noisy = cfg;
  noisy.noise_variance = 4.0;  // large noise exercises both clip boundaries
  LatentFactorEnv nenv(noisy, SeededRng(18, 0));
  SeededRng r1(20, 0), r2(20, 0);
  for (int k = 0; k < 1000; ++k) {
    const double x = nenv.sample_rating(k % 30, (7 * k) % 30, r1);
    CHECK(x >= noisy.clip_lo);
    CHECK(x <= noisy.clip_hi);
    CHECK(x == nenv.sample_rating(k % 30, (7 * k) % 30, r2));  // determinism
  }
}

TEST_CASE("linear-factor environment: Monte Carlo mean on an interior pair") {
  LatentFactorEnvConfig cfg;
  cfg.users = 10;
  cfg.items = 10;
  cfg.k = 3;
  cfg.noise_variance = 0.01;
  LatentFactorEnv env(cfg, SeededRng(21, 0));

  // Pick the pair whose mean sits deepest inside the clip range so the
  // clipped mean and the raw mean agree to far below the tolerance.
  int bu = 0, bi = 0;
  double best = -1.0;
  for (int u = 0; u < 10; ++u)
    for (int i = 0; i < 10; ++i) {
      const double m = env.true_rating(u, i);
      const double margin = std::min(m - cfg.clip_lo, cfg.clip_hi - m);
      if (margin > best) {
        best = margin;
        bu = u;
        bi = i;
      }
    }
  REQUIRE(best > 0.5);  // at least 5 noise sds from either boundary

  const int n = 100000;
  SeededRng rng(22, 0);
  double sum = 0.0;
  for (int k = 0; k < n; ++k) sum += env.sample_rating(bu, bi, rng);
  const double se = std::sqrt(cfg.noise_variance / n);
  CHECK(std::abs(sum / n - env.true_rating(bu, bi)) <= 3.0 * se);
}

TEST_CASE("factor spread incompatible with the clip range is rejected") {
  LatentFactorEnvConfig cfg;
  cfg.users = 40;
  cfg.items = 40;
  cfg.k = 4;
  cfg.factor_spread = 50.0;  // means land far outside [1, 5]
  CHECK_THROWS_AS(LatentFactorEnv(cfg, SeededRng(23, 0)), std::runtime_error);
}

TEST_CASE("rating a recommendation step") {
  LatentFactorEnvConfig cfg;
  cfg.users = 3;
  cfg.items = 4;
  cfg.k = 2;
  Environment env{LatentFactorEnv(cfg, SeededRng(24, 0))};

  RecommendationMatrix recs;
  recs.entries = BinaryMat::Zero(3, 4);
  recs.timestep = 1;

  SeededRng rng(25, 0);
  const RatingMatrix empty = rate_step(env, recs, rng);
  CHECK(empty.entries.cwiseAbs().sum() == 0.0);  // nothing shown, nothing rated

  recs.entries(1, 2) = 1;
  SeededRng r1(26, 0), r2(26, 0);
  const RatingMatrix one = rate_step(env, recs, r1);
  CHECK((one.entries.array() != 0.0).count() == 1);
  CHECK(one.entries(1, 2) != 0.0);
  const RatingMatrix again = rate_step(env, recs, r2);
  CHECK(one.entries == again.entries);  // fixed seed, identical draws
}
