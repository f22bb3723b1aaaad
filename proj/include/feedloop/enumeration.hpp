#pragma once

#include <functional>
#include <string>
#include <vector>

#include "feedloop/estimators.hpp"
#include "feedloop/rng.hpp"
#include "feedloop/types.hpp"

namespace feedloop {

// Brute-force verification world: a handful of user-item pairs with
// discrete rating laws, small enough that every recommendation trajectory
// and rating outcome can be enumerated with exact probabilities.  One pair
// is recommended per step (the regime of the closed-form coefficients).
//
// Hard limits: users * items <= 6, rating support <= 3 values, horizon <= 3.
struct TinyWorld {
  int users = 1;
  int items = 2;
  // Per pair (row-major u * items + i): support values (inside (0, 1]) and
  // their probabilities.  The law is stationary: it never depends on the
  // step or on history.
  std::vector<std::vector<double>> support;
  std::vector<std::vector<double>> probs;

  int pairs() const { return users * items; }
  void validate() const;
  // Expected model log-likelihood of one interaction with pair `p`:
  // sum_r P(r) * log N(r; prediction, noise).
  double expected_log_likelihood(const LatentParams& params, int pair) const;
};

// One enumerated interaction: pair index and the index into its support.
struct TinyEvent {
  int pair = 0;
  int outcome = 0;
};
using TinyTrajectory = std::vector<TinyEvent>;

// Policy over pairs with exactly computable probabilities.  Given the
// trajectory so far, returns the distribution over the world's pairs for
// the next step (must sum to 1; zero entries are genuine impossibilities
// and become zero propensities).  `no_repeat` policies must put zero mass
// on consumed pairs.
struct TinyPolicy {
  bool no_repeat = true;
  std::function<Vec(const TinyWorld&, const TinyTrajectory&)> distribution;
};

// Uniform over unconsumed pairs (no-repeat regime).
TinyPolicy tiny_uniform_remaining();
// Feedback policy over unconsumed pairs: softmax over pairs of
// gain * sum_past rating * exp(-|pair - past pair|), a similarity-weighted
// echo of past ratings.  (A consumed pair's own score is masked with it,
// so the coupling across pairs is what makes the policy history-dependent;
// scoring each pair only by its own past ratings would be vacuous here.)
TinyPolicy tiny_feedback_remaining(double gain);
// With-repeat feedback policy over all pairs (positivity holds at every
// step): softmax(gain * cumulative observed rating of the pair itself).
TinyPolicy tiny_feedback_with_repeat(double gain);

// The exposure-free objective
//   sum_{s=1..t} sum_{u,i} sum_{a in {0,1}}
//     E_traj[ E_{R ~ P(R | do(A_{s,ui} = a), history)}[ log P_model ] ]
// computed by enumerating every trajectory prefix under the policy with
// exact probabilities.  The a = 0 term is identically zero (no
// recommendation, no rating: the model puts mass 1 on "unobserved"), so
// only a = 1 contributes.  This is the quantity the corrected estimators
// are unbiased for; note it weights every pair equally at every step
// rather than by the policy's exposure marginals.
double exact_causal_objective(const TinyWorld& world, const TinyPolicy& policy,
                              const LatentParams& params, int horizon);

// Exact expectation of an estimator value over all trajectories of length
// `horizon`: enumerates every (recommendation, rating) trajectory, replays
// it into an InteractionHistory (with full per-step propensity tables),
// asks the estimator module for weights, and accumulates
// P(trajectory) * sum_obs weight * log-likelihood.
double expected_estimator_value(WeightScheme scheme, const TinyWorld& world,
                                const TinyPolicy& policy,
                                const LatentParams& params, int horizon);

// Exact expected total weight attached to each (step, pair) term:
// entry (s - 1, p) is E[ 1{pair p observed at s} * total weight ], i.e. the
// effective coefficient in front of that term's log-likelihood.  Used to
// audit the claim that the default coefficients equalize expected per-term
// weights under an exchangeable policy.
Mat expected_per_term_weight(WeightScheme scheme, const TinyWorld& world,
                             const TinyPolicy& policy, int horizon);

// A randomized verification instance: world, policy, model parameters and
// horizon, drawn from the regime in which the scheme under test is
// provably unbiased.  `no_repeat` selects a no-repeat feedback policy with
// positive mass on every remaining pair (the corrected schemes' regime);
// otherwise a with-repeat feedback policy with positive mass on every pair
// (the inverse-propensity regime).
struct TinyInstance {
  TinyWorld world;
  TinyPolicy policy;
  LatentParams params;
  int horizon = 1;
};
TinyInstance random_tiny_instance(SeededRng& rng, bool no_repeat);

// One named result from the enumeration audit behind the `oracle-check`
// CLI subcommand.
struct OracleCheck {
  std::string name;
  bool pass = false;
  std::string detail;  // the measured error and the tolerance it met/missed
};

// The full enumeration audit: coefficient telescoping, exact unbiasedness
// of the corrected and inverse-propensity schemes on `instances` random
// tiny instances each (tolerance 1e-10), a crafted instance where the
// unweighted estimator is visibly biased, and expected per-term weight
// constancy under an exchangeable policy.
std::vector<OracleCheck> oracle_suite(int instances, std::uint64_t seed);

}  // namespace feedloop
