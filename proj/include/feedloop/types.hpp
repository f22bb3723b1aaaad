#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Core>

namespace feedloop {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using BinaryMat = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

// One simulation step's 0/1 exposure matrix.  Row u, column i is 1 iff item
// i was recommended to user u at this step.  Each user row sums to either 0
// (user not targeted this step) or the history's per-user slate size N.
struct RecommendationMatrix {
  BinaryMat entries;  // U x I
  int timestep = 0;   // 1-based step index
};

// Ratings observed at one step.  By convention a rating is nonzero only
// where the matching recommendation entry is 1: an unrecommended pair has
// no observation, encoded as 0.  Environments emit ratings bounded away
// from zero so the encoding is unambiguous.
struct RatingMatrix {
  Mat entries;  // U x I
  int timestep = 0;
};

// Bilinear preference model: predicted affinity of (u, i) is
// user_vectors.row(u) . item_vectors.row(i).  noise_variance is the
// variance of the Gaussian observation model used for log-likelihoods.
struct LatentParams {
  Mat user_vectors;  // U x K
  Mat item_vectors;  // I x K
  double noise_variance = 1.0;

  int k() const { return static_cast<int>(user_vectors.cols()); }
  bool empty() const { return user_vectors.size() == 0; }
};

// Probability that a pair was recommended at the step where it actually
// was, recorded at recommendation time.  A realized event cannot have zero
// probability, so propensity is required to be in (0, 1].
struct PropensityRecord {
  int step = 0;
  int user = 0;
  int item = 0;
  double propensity = 0.0;
};

// Per-step propensity information.  `records` carries one entry per
// recommended pair.  `full_table`, when the policy can expose it, holds
// P(A_{s,ui} = 1 | current model) for every pair including the
// unrecommended ones; the general reweighting scheme needs it to locate
// zero-probability pairs.
struct PropensityLog {
  std::vector<PropensityRecord> records;
  std::optional<Mat> full_table;  // U x I
  int timestep = 0;
};

// One observed interaction: user u was shown item i at step s and produced
// `rating`, where the probability of that exposure was `propensity`.
struct Observation {
  int step = 0;
  int user = 0;
  int item = 0;
  double rating = 0.0;
  double propensity = 0.0;
};

// (u, i, s): pair (u, i) was consumed at step s.
using ConsumedPair = std::tuple<int, int, int>;

// Append-only log of a closed-loop run: per step the recommendations,
// ratings, propensities, and the model estimate that produced them.
// Steps are stored as compact observation triplets rather than dense
// matrices; dense matrices appear only at the record_step interface.
class InteractionHistory {
 public:
  struct Step {
    std::vector<Observation> observations;  // ascending (user, item)
    std::optional<Mat> propensity_table;    // U x I if the policy exposed it
    std::optional<LatentParams> params_estimate;
  };

  // `recs_per_user`: slate size N for every targeted user.  `no_repeat`:
  // a pair, once consumed, may never be recommended again.
  InteractionHistory(int users, int items, int recs_per_user, bool no_repeat);

  int users() const { return users_; }
  int items() const { return items_; }
  int recs_per_user() const { return recs_per_user_; }
  bool no_repeat() const { return no_repeat_; }
  int horizon() const { return static_cast<int>(steps_.size()); }

  const std::vector<Step>& steps() const { return steps_; }
  // All observations across steps, in (step, user, item) order.
  std::vector<Observation> observations() const;
  bool consumed(int user, int item) const;

  // The only mutator: validates and appends one step.  The step's
  // timestep must be horizon() + 1 (no gaps), every recommended pair must
  // carry a positive propensity record, ratings must sit exactly on the
  // recommended pairs, and in no-repeat mode a consumed pair must never
  // reappear.
  void record_step(const RecommendationMatrix& recs,
                   const RatingMatrix& ratings, const PropensityLog& props,
                   const std::optional<LatentParams>& estimate = std::nullopt);

  // Every consumed (u, i, s), ordered by (s, u, i).
  std::vector<ConsumedPair> consumed_pairs() const;

 private:
  int users_ = 0;
  int items_ = 0;
  int recs_per_user_ = 1;
  bool no_repeat_ = true;
  std::vector<Step> steps_;
  std::vector<std::uint8_t> consumed_;  // U x I, row-major
};

}  // namespace feedloop
