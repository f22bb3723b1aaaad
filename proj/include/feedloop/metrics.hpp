#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "feedloop/types.hpp"

namespace feedloop {

// Held-out (user, item, true rating) triples.  Test pairs are never
// recommended during a run; they exist only for evaluation.
struct TestPoint {
  int user = 0;
  int item = 0;
  double rating = 0.0;
};

struct TestSet {
  std::vector<TestPoint> points;
};

// Per-arm, per-replication metric trajectories: values[metric][t - 1] is
// the metric after step t.
struct MetricSeries {
  std::string arm;
  int replication = 0;
  std::map<std::string, std::vector<double>> values;
};

double rmse(std::span<const double> predicted, std::span<const double> actual);

// (MSE, MAE) in one pass.
std::pair<double, double> mse_mae(std::span<const double> predicted,
                                  std::span<const double> actual);

// Discounted cumulative gain ratio for one user.  `gains` holds the true
// gains in predicted-rank order; `ideal_gains` the same multiset sorted
// descending.  DCG = sum_{j=1..k} gain_j / log2(j + 1).  An all-zero ideal
// ranking is perfect by convention (nothing to rank).
double ndcg_at_k(std::span<const double> gains,
                 std::span<const double> ideal_gains, int k);

// |a intersect b| / |a union b| on item-id sets (inputs may be unsorted and
// may contain duplicates; they are treated as sets).  Both sets empty is
// undefined.
double jaccard(std::span<const int> a, std::span<const int> b);

// Mean pairwise Jaccard similarity of users' cumulative recommended-item
// sets after `timestep` steps: the homogenization level of the system.
double homogenization(const InteractionHistory& history, int timestep);
// Same, over explicitly supplied per-user cumulative sets (used for arms
// whose metric recommendations are hypothetical rather than logged).
double homogenization(const std::vector<std::vector<int>>& user_sets);

// Signed gap between a metric under the actual recommender and under a
// shadow recommender trained on random exposure: positive means the
// feedback loop inflated the metric.
double feedback_effect(double metric_actual, double metric_shadow);

}  // namespace feedloop
