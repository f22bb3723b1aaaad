#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "feedloop/types.hpp"

namespace feedloop {

// Training-loss reweighting schemes.  The closed-loop log of a recommender
// is a biased sample of user preferences: what was observed depends on what
// earlier models chose to show.  Each scheme assigns one weight per
// observed (s, u, i) log-likelihood (equivalently squared-error) term so
// that the weighted sum targets the exposure-free objective.
enum class WeightScheme { naive, ipw, cafl_general, cafl_special };

std::string weight_scheme_name(WeightScheme scheme);

struct WeightedObservation {
  int step = 0;
  int user = 0;
  int item = 0;
  double weight = 0.0;
};

// One weight per observation, in the same (step, user, item) order as
// InteractionHistory::observations().
struct WeightAssignment {
  WeightScheme scheme = WeightScheme::naive;
  std::vector<WeightedObservation> weights;

  // Lookup by key; throws if the observation is not present.
  double at(int step, int user, int item) const;
};

// Per-step coefficients c_1..c_t used by the corrected schemes.  Any
// nonnegative c summing to the horizon t yields an unbiased objective; the
// default choice additionally equalizes the expected weight in front of
// every term.
struct CVector {
  Vec c;  // size t, c.sum() == t within 1e-9

  static CVector uniform(int horizon);  // all ones (ablation choice)
  void validate() const;
};

// Default coefficients c_s = UI*(UI - t) / ((UI - s)*(UI - s + 1)) for the
// one-interaction-per-step, no-repeat regime with UI = users*items pairs;
// the sum telescopes to exactly t.  Requires t < UI (after t = UI steps
// there is nothing left to recommend).
CVector compute_c(int horizon, int total_pairs);

// weight = 1 for every observation: the uncorrected (feedback-blind)
// maximum-likelihood objective.
WeightAssignment naive_weights(const InteractionHistory& history);

// weight = 1 / propensity: inverse-propensity weighting.  Valid only when
// every pair could have been recommended at every step; a no-repeat history
// of two or more steps (or a propensity table with a zero on an unconsumed
// pair) violates positivity and raises an error suggesting the corrected
// scheme.
WeightAssignment ipw_weights(const InteractionHistory& history);

// Closed-form special case for the no-repeat, one-interaction-per-user-
// per-step regime: the observation of pair (u, i) at step s gets
//
//   W = c_s / p + sum_{s' > s} c_{s'}
//     = UI/(UI-s) * ((t-s) + (UI-t)/(UI-s+1) * 1/p)
//
// with p the logged propensity.  The 1/p part corrects this step's
// exposure bias; the trailing sum stands in for the steps at which the
// consumed pair could no longer be shown.
WeightAssignment cafl_special_weights(const InteractionHistory& history);
WeightAssignment cafl_special_weights(const InteractionHistory& history,
                                      const CVector& c);

struct CaflDiagnostics {
  // Zero-propensity (s, u, i) terms whose replacement average had no
  // observations to draw on; they contribute nothing to the objective.
  int empty_average_terms = 0;
};

// General corrected scheme.  For every step s and pair (u, i):
//  - positive propensity: the realized observation gets c_s / p_s;
//  - zero propensity (the pair could not have been shown): the term is
//    replaced by the average of the pair's observed log-likelihood terms
//    from positive-propensity steps, i.e. each of those n observations
//    gains c_s / n.  With no such observations the term contributes 0 and
//    is counted in the diagnostics.
// Requires per-step full propensity tables, and every pair must have
// positive propensity at some step.  Weights are nonnegative.
WeightAssignment cafl_general_weights(const InteractionHistory& history,
                                      CaflDiagnostics* diagnostics = nullptr);
WeightAssignment cafl_general_weights(const InteractionHistory& history,
                                      const CVector& c,
                                      CaflDiagnostics* diagnostics = nullptr);

// Audit dump, one "s u i weight scheme" line per observation.
void write_weights(std::ostream& out, const WeightAssignment& assignment);
void write_weights_file(const std::string& path,
                        const WeightAssignment& assignment);

}  // namespace feedloop
