#pragma once

#include <utility>
#include <variant>

#include "feedloop/rng.hpp"
#include "feedloop/types.hpp"

namespace feedloop {

// Beta distribution specification by mean and variance.
struct BetaPrimeSpec {
  double mean = 0.5;       // in (0, 1)
  double variance = 0.01;  // > 0
  // false: shape a = mean*(1-mean)/variance - 1, b = a*(1/mean - 1).  The
  // resulting mean is exactly `mean` but the realized variance is
  // mean*(1-mean)/(a/mean + 1), which differs from `variance` (e.g. mean
  // 0.5, variance 0.01 gives Beta(24, 24) with true variance ~0.0051).
  // true: a = mean*nu, b = (1-mean)*nu with nu = mean*(1-mean)/variance - 1,
  // matching both moments exactly.  The first form is the project default;
  // the second is an opt-in audit mode.
  bool moment_exact = false;
};

// Shape parameters (a, b) for the requested (mean, variance).  Requires
// mean*(1-mean) > variance, otherwise no positive shapes exist
// ("variance too large for mean").
std::pair<double, double> beta_prime_params(const BetaPrimeSpec& spec);

// Topic-model environment: users and items live on the K-simplex, ratings
// are Beta draws with mean theta_u . beta_i, and an item-item similarity
// matrix S (Beta draws with mean beta_i . beta_j, sampled once at
// construction) drives an exposure process that boosts items similar to a
// user's past consumption.
struct DirichletEnvConfig {
  int users = 100;
  int items = 100;
  int k = 10;
  double rating_variance = 0.01;     // Beta variance spec for ratings and S
  bool moment_exact = false;
  double user_concentration = 20.0;  // symmetric Dirichlet for mu_theta
  double item_concentration = 100.0; // symmetric Dirichlet for mu_beta
  int top_k = 0;       // exposure boost set size; 0 -> ceil(0.1 * items)
                       // when items < 1000, else 100
  double boost = 10.0; // exposure weight of the top_k-ranked items
};

class DirichletEnv {
 public:
  DirichletEnv(const DirichletEnvConfig& config, SeededRng rng);

  const DirichletEnvConfig& config() const { return config_; }
  int users() const { return config_.users; }
  int items() const { return config_.items; }
  int top_k() const { return top_k_; }

  const Mat& user_topics() const { return theta_; }   // U x K rows on simplex
  const Mat& item_topics() const { return beta_; }    // I x K rows on simplex
  const Mat& similarity() const { return s_; }        // I x I, entries (0,1)

  // Beta mean theta_u . beta_i, clamped into the representable range
  // (mean*(1-mean) must exceed the variance with some slack; topic dot
  // products can fall outside it).
  double rating_mean(int user, int item) const;
  double sample_rating(int user, int item, SeededRng& rng) const;

 private:
  DirichletEnvConfig config_;
  int top_k_ = 0;
  Mat theta_, beta_, s_;
};

// Affinity of `item` for `user` given past consumption: sum over past
// interactions (u, j) of rating * exp(S_ij).  Zero when the user has no
// history.
double score_pan(const DirichletEnv& env, const InteractionHistory& history,
                 int user, int item);

// Exposure distribution over items for `user` at step history.horizon()+1:
// weight 0 for consumed items, `boost` for items ranked in the top_k by
// score_pan (ties by ascending item id), 1 otherwise, normalized.  Needs at
// least one recorded step (the first step is uniform by construction) and
// at least one unconsumed item.
Vec exposure_probs_pan(const DirichletEnv& env,
                       const InteractionHistory& history, int user);

// Linear-Gaussian environment: the true rating of (u, i) is
// theta_u . beta_i and observations add Gaussian noise, clipped to
// [clip_lo, clip_hi].  Construction resamples the ground-truth factors
// until at least 99% of pair means lie inside the clip range, so clipping
// stays a boundary effect.
struct LatentFactorEnvConfig {
  int users = 100;
  int items = 100;
  int k = 8;
  double noise_variance = 0.25;
  double clip_lo = 1.0;  // must be > 0: zero is reserved for "unobserved"
  double clip_hi = 5.0;
  double factor_spread = 0.25;  // entrywise sd of the ground-truth factors
};

class LatentFactorEnv {
 public:
  LatentFactorEnv(const LatentFactorEnvConfig& config, SeededRng rng);

  const LatentFactorEnvConfig& config() const { return config_; }
  int users() const { return config_.users; }
  int items() const { return config_.items; }
  const LatentParams& ground_truth() const { return truth_; }

  double true_rating(int user, int item) const;  // clipped noiseless mean
  double sample_rating(int user, int item, SeededRng& rng) const;

 private:
  LatentFactorEnvConfig config_;
  LatentParams truth_;
};

using Environment = std::variant<LatentFactorEnv, DirichletEnv>;

int env_users(const Environment& env);
int env_items(const Environment& env);
double env_sample_rating(const Environment& env, int user, int item,
                         SeededRng& rng);
// Reference rating for held-out evaluation: the clipped noiseless mean for
// the latent environment, the (clamped) Beta mean for the topic one.
double env_true_rating(const Environment& env, int user, int item);

// Sample a rating for every recommended pair (users ascending, items
// ascending within a user — the draw order is part of the reproducibility
// contract).
RatingMatrix rate_step(const Environment& env, const RecommendationMatrix& recs,
                       SeededRng& rng);

}  // namespace feedloop
