#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "feedloop/estimators.hpp"
#include "feedloop/rng.hpp"
#include "feedloop/types.hpp"

namespace feedloop {

// Predicted affinity of user u for item i under the bilinear model.
double predict(const LatentParams& params, int user, int item);

// Gaussian observation log-density of `rating` for pair (u, i):
// log N(rating; predict(u, i), noise_variance).
double gaussian_log_likelihood(const LatentParams& params, int user, int item,
                               double rating);

struct MFConfig {
  int k = 8;
  double lambda = 0.1;     // L2 penalty on both factor matrices
  int als_sweeps = 10;
  double sgd_lr = 1e-3;    // adaptive-moment step size
  int sgd_epochs = 50;
  int sgd_batch = 256;
  double init_scale = 0.0;  // entrywise init sd; 0 -> 0.1 / sqrt(k)
  double noise_variance = 1.0;  // carried into the fitted params
};

// Weighted ridge objective the two fitters minimize:
//   sum_obs w * (rating - theta_u . beta_i)^2
//   + lambda * (|theta|_F^2 + |beta|_F^2).
double weighted_objective(const InteractionHistory& history,
                          const WeightAssignment& weights,
                          const LatentParams& params, double lambda);

// Alternating weighted least squares.  Item vectors are initialized from
// `rng` (Gaussian, sd init_scale), then users and items are solved in
// alternation (users first); every half-sweep solves an exact ridge system,
// so the objective never increases.  A user or item with no observations
// and lambda > 0 gets the zero vector.  lambda = 0 with a singular system
// is an error ("increase regularization").
LatentParams fit_weighted_als(const InteractionHistory& history,
                              const WeightAssignment& weights,
                              const MFConfig& config, SeededRng rng);

// Stochastic minibatch descent with adaptive first/second moment estimates
// on the same objective.  Deterministic given the rng state; returns the
// best (lowest-objective) iterate, so the result never degrades the
// initialization; zero epochs returns the initialization itself.  Raises
// "step size too large" if the objective exceeds 10x its initial value.
LatentParams fit_weighted_sgd(const InteractionHistory& history,
                              const WeightAssignment& weights,
                              const MFConfig& config, SeededRng rng);
// Unweighted convenience: identical to fit_weighted_sgd with unit weights.
LatentParams fit_sgd(const InteractionHistory& history, const MFConfig& config,
                     SeededRng rng);

// Full analytic gradient of weighted_objective with respect to both factor
// matrices (used by the optimizer and by finite-difference audits).
std::pair<Mat, Mat> objective_gradient(const InteractionHistory& history,
                                       const WeightAssignment& weights,
                                       const LatentParams& params,
                                       double lambda);

enum class PolicyKind { uniform_random, topn_epsilon, softmax, pan_exposure };

struct Policy {
  PolicyKind kind = PolicyKind::topn_epsilon;
  int n = 1;              // slate size per user per step
  double epsilon = 0.1;   // exploration mass for topn_epsilon
  double tau = 1.0;       // softmax temperature
};

// Pairs that may never be recommended (e.g. held-out test pairs), row-major
// U x I mask; empty means nothing is excluded.
using ExclusionMask = std::vector<std::uint8_t>;

// Distribution over items for one user.  Infeasible items (consumed ones in
// no-repeat mode, excluded ones always) get probability zero.
//  - uniform_random: uniform over feasible items.
//  - topn_epsilon: (1 - epsilon) spread evenly over the top-n feasible
//    items by predicted affinity (ties by ascending item id), plus epsilon
//    spread uniformly over all feasible items.
//  - softmax: proportional to exp(predict / tau) over feasible items.
// pan_exposure is environment-driven and resolved by the caller, not here.
Vec policy_probs(const Policy& policy, const LatentParams& params,
                 const InteractionHistory& history, int user,
                 const ExclusionMask& excluded = {});

// Sample one step of recommendations for every user and log propensities.
// Per user, `policy.n` items are drawn without replacement.  For n = 1 the
// logged propensity is exactly the policy probability of the drawn item
// and a full per-pair probability table is attached; for n = 2 the exact
// marginal inclusion probability is logged; larger slates log the
// conditional draw probability (documented approximation).
std::pair<RecommendationMatrix, PropensityLog> recommend(
    const Policy& policy, const LatentParams& params,
    const InteractionHistory& history, SeededRng& rng,
    const ExclusionMask& excluded = {});

// Same sampler and propensity-logging rules, but each user's distribution
// is supplied directly (for environment-driven exposure processes that do
// not fit the Policy cases).  `probs_for_user(u)` must return a length-I
// nonnegative vector with positive total mass.
std::pair<RecommendationMatrix, PropensityLog> recommend_from(
    const std::function<Vec(int user)>& probs_for_user, int slate_size,
    const InteractionHistory& history, SeededRng& rng);

}  // namespace feedloop
