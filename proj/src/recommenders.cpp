#include "feedloop/recommenders.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/LU>

namespace feedloop {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

void check_weights_cover(const InteractionHistory& history,
                         const WeightAssignment& weights) {
  std::size_t count = 0;
  for (const auto& step : history.steps()) count += step.observations.size();
  require(weights.weights.size() == count,
          "fit: weights must cover exactly the observed pairs");
  std::size_t idx = 0;
  for (const auto& step : history.steps())
    for (const Observation& o : step.observations) {
      const WeightedObservation& w = weights.weights[idx++];
      require(w.step == o.step && w.user == o.user && w.item == o.item,
              "fit: weight/observation order mismatch");
      require(w.weight >= 0.0 && std::isfinite(w.weight),
              "fit: weights must be finite and nonnegative");
    }
}

double init_scale_or_default(const MFConfig& config) {
  require(config.k >= 1, "fit: k must be >= 1");
  return config.init_scale > 0.0 ? config.init_scale
                                 : 0.1 / std::sqrt(config.k);
}

struct ObsArrays {
  std::vector<int> user, item;
  std::vector<double> rating, weight;
};

ObsArrays flatten(const InteractionHistory& history,
                  const WeightAssignment& weights) {
  ObsArrays a;
  std::size_t idx = 0;
  for (const auto& step : history.steps())
    for (const Observation& o : step.observations) {
      a.user.push_back(o.user);
      a.item.push_back(o.item);
      a.rating.push_back(o.rating);
      a.weight.push_back(weights.weights[idx++].weight);
    }
  return a;
}

// One ridge half-sweep: re-solve every row of `solve_for` holding `fixed`
// constant.  `obs_of` maps each solved row to its observation indices.
void ridge_half_sweep(Mat& solve_for, const Mat& fixed, const ObsArrays& a,
                      const std::vector<std::vector<int>>& obs_of,
                      const std::vector<int>& other_index, double lambda) {
  const int k = static_cast<int>(solve_for.cols());
  for (int row = 0; row < solve_for.rows(); ++row) {
    Mat gram = lambda * Mat::Identity(k, k);
    Vec rhs = Vec::Zero(k);
    for (int obs : obs_of[row]) {
      const double w = a.weight[obs];
      if (w == 0.0) continue;
      const Vec v = fixed.row(other_index[obs]).transpose();
      gram.noalias() += w * v * v.transpose();
      rhs.noalias() += w * a.rating[obs] * v;
    }
    if (lambda == 0.0) {
      Eigen::FullPivLU<Mat> lu(gram);
      if (lu.rank() < k)
        throw std::runtime_error(
            "fit_weighted_als: singular system with lambda = 0; increase "
            "regularization");
      solve_for.row(row) = lu.solve(rhs).transpose();
    } else {
      solve_for.row(row) = gram.ldlt().solve(rhs).transpose();
    }
  }
}

}  // namespace

double predict(const LatentParams& params, int user, int item) {
  require(!params.empty(), "predict: empty model");
  require(user >= 0 && user < params.user_vectors.rows() && item >= 0 &&
              item < params.item_vectors.rows(),
          "predict: index out of range");
  return params.user_vectors.row(user).dot(params.item_vectors.row(item));
}

double gaussian_log_likelihood(const LatentParams& params, int user, int item,
                               double rating) {
  require(params.noise_variance > 0.0,
          "gaussian_log_likelihood: noise variance must be positive");
  const double mean = predict(params, user, item);
  const double d = rating - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * params.noise_variance) -
         0.5 * d * d / params.noise_variance;
}

double weighted_objective(const InteractionHistory& history,
                          const WeightAssignment& weights,
                          const LatentParams& params, double lambda) {
  check_weights_cover(history, weights);
  double obj = lambda * (params.user_vectors.squaredNorm() +
                         params.item_vectors.squaredNorm());
  std::size_t idx = 0;
  for (const auto& step : history.steps())
    for (const Observation& o : step.observations) {
      const double d = o.rating - predict(params, o.user, o.item);
      obj += weights.weights[idx++].weight * d * d;
    }
  return obj;
}

std::pair<Mat, Mat> objective_gradient(const InteractionHistory& history,
                                       const WeightAssignment& weights,
                                       const LatentParams& params,
                                       double lambda) {
  check_weights_cover(history, weights);
  Mat gu = 2.0 * lambda * params.user_vectors;
  Mat gi = 2.0 * lambda * params.item_vectors;
  std::size_t idx = 0;
  for (const auto& step : history.steps())
    for (const Observation& o : step.observations) {
      const double w = weights.weights[idx++].weight;
      const double d = o.rating - predict(params, o.user, o.item);
      gu.row(o.user) -= 2.0 * w * d * params.item_vectors.row(o.item);
      gi.row(o.item) -= 2.0 * w * d * params.user_vectors.row(o.user);
    }
  return {std::move(gu), std::move(gi)};
}

LatentParams fit_weighted_als(const InteractionHistory& history,
                              const WeightAssignment& weights,
                              const MFConfig& config, SeededRng rng) {
  check_weights_cover(history, weights);
  require(config.lambda >= 0.0, "fit: lambda must be nonnegative");
  require(config.als_sweeps >= 1, "fit: need at least one sweep");
  const double scale = init_scale_or_default(config);

  LatentParams params;
  params.noise_variance = config.noise_variance;
  params.user_vectors = Mat::Zero(history.users(), config.k);
  params.item_vectors = Mat(history.items(), config.k);
  for (int i = 0; i < history.items(); ++i)
    for (int k = 0; k < config.k; ++k)
      params.item_vectors(i, k) = rng.normal(0.0, scale);

  const ObsArrays a = flatten(history, weights);
  std::vector<std::vector<int>> obs_of_user(history.users());
  std::vector<std::vector<int>> obs_of_item(history.items());
  for (std::size_t j = 0; j < a.user.size(); ++j) {
    obs_of_user[a.user[j]].push_back(static_cast<int>(j));
    obs_of_item[a.item[j]].push_back(static_cast<int>(j));
  }

  for (int sweep = 0; sweep < config.als_sweeps; ++sweep) {
    ridge_half_sweep(params.user_vectors, params.item_vectors, a, obs_of_user,
                     a.item, config.lambda);
    ridge_half_sweep(params.item_vectors, params.user_vectors, a, obs_of_item,
                     a.user, config.lambda);
  }
  return params;
}

LatentParams fit_weighted_sgd(const InteractionHistory& history,
                              const WeightAssignment& weights,
                              const MFConfig& config, SeededRng rng) {
  check_weights_cover(history, weights);
  require(config.lambda >= 0.0, "fit: lambda must be nonnegative");
  require(config.sgd_epochs >= 0, "fit: epochs must be nonnegative");
  require(config.sgd_batch >= 1, "fit: batch size must be >= 1");
  require(config.sgd_lr > 0.0, "fit: step size must be positive");
  const double scale = init_scale_or_default(config);

  LatentParams params;
  params.noise_variance = config.noise_variance;
  params.user_vectors = Mat(history.users(), config.k);
  params.item_vectors = Mat(history.items(), config.k);
  for (int u = 0; u < history.users(); ++u)
    for (int k = 0; k < config.k; ++k)
      params.user_vectors(u, k) = rng.normal(0.0, scale);
  for (int i = 0; i < history.items(); ++i)
    for (int k = 0; k < config.k; ++k)
      params.item_vectors(i, k) = rng.normal(0.0, scale);

  const ObsArrays a = flatten(history, weights);
  const std::size_t n = a.user.size();
  const double initial = weighted_objective(history, weights, params,
                                            config.lambda);
  LatentParams best = params;
  double best_obj = initial;
  if (config.sgd_epochs == 0 || n == 0) return best;

  // Adaptive moments (first/second moment estimates with bias correction).
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  Mat mu = Mat::Zero(history.users(), config.k);
  Mat vu = Mat::Zero(history.users(), config.k);
  Mat mi = Mat::Zero(history.items(), config.k);
  Mat vi = Mat::Zero(history.items(), config.k);
  long step_count = 0;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < config.sgd_epochs; ++epoch) {
    // Fisher-Yates shuffle driven by the project rng (deterministic).
    for (std::size_t j = n; j > 1; --j)
      std::swap(order[j - 1], order[rng.uniform_index(j)]);

    for (std::size_t start = 0; start < n;
         start += static_cast<std::size_t>(config.sgd_batch)) {
      const std::size_t stop =
          std::min(n, start + static_cast<std::size_t>(config.sgd_batch));
      const double frac =
          static_cast<double>(stop - start) / static_cast<double>(n);
      Mat gu = (2.0 * config.lambda * frac) * params.user_vectors;
      Mat gi = (2.0 * config.lambda * frac) * params.item_vectors;
      for (std::size_t j = start; j < stop; ++j) {
        const std::size_t obs = order[j];
        const int u = a.user[obs], i = a.item[obs];
        const double d =
            a.rating[obs] -
            params.user_vectors.row(u).dot(params.item_vectors.row(i));
        gu.row(u) -= 2.0 * a.weight[obs] * d * params.item_vectors.row(i);
        gi.row(i) -= 2.0 * a.weight[obs] * d * params.user_vectors.row(u);
      }
      ++step_count;
      const double corr1 = 1.0 - std::pow(b1, step_count);
      const double corr2 = 1.0 - std::pow(b2, step_count);
      mu = b1 * mu + (1.0 - b1) * gu;
      vu = b2 * vu + (1.0 - b2) * gu.cwiseProduct(gu);
      mi = b1 * mi + (1.0 - b1) * gi;
      vi = b2 * vi + (1.0 - b2) * gi.cwiseProduct(gi);
      params.user_vectors -=
          (config.sgd_lr / corr1) *
          (mu.array() / ((vu.array() / corr2).sqrt() + eps)).matrix();
      params.item_vectors -=
          (config.sgd_lr / corr1) *
          (mi.array() / ((vi.array() / corr2).sqrt() + eps)).matrix();
    }

    const double obj =
        weighted_objective(history, weights, params, config.lambda);
    if (obj > 10.0 * std::max(initial, 1e-12))
      throw std::runtime_error(
          "fit_weighted_sgd: objective diverged; step size too large");
    if (obj < best_obj) {
      best_obj = obj;
      best = params;
    }
  }
  return best;
}

LatentParams fit_sgd(const InteractionHistory& history, const MFConfig& config,
                     SeededRng rng) {
  return fit_weighted_sgd(history, naive_weights(history), config,
                          std::move(rng));
}

Vec policy_probs(const Policy& policy, const LatentParams& params,
                 const InteractionHistory& history, int user,
                 const ExclusionMask& excluded) {
  require(user >= 0 && user < history.users(),
          "policy_probs: user out of range");
  require(excluded.empty() ||
              excluded.size() == static_cast<std::size_t>(history.users()) *
                                     history.items(),
          "policy_probs: exclusion mask dimension mismatch");
  const int items = history.items();
  std::vector<int> feasible;
  feasible.reserve(items);
  for (int i = 0; i < items; ++i) {
    if (history.no_repeat() && history.consumed(user, i)) continue;
    if (!excluded.empty() &&
        excluded[static_cast<std::size_t>(user) * items + i])
      continue;
    feasible.push_back(i);
  }
  if (feasible.empty())
    throw std::runtime_error("policy_probs: user exhausted (no feasible "
                             "items)");
  const double f = static_cast<double>(feasible.size());

  Vec probs = Vec::Zero(items);
  switch (policy.kind) {
    case PolicyKind::uniform_random: {
      for (int i : feasible) probs[i] = 1.0 / f;
      break;
    }
    case PolicyKind::topn_epsilon: {
      require(policy.epsilon >= 0.0 && policy.epsilon <= 1.0,
              "policy_probs: epsilon must be in [0, 1]");
      require(policy.n >= 1, "policy_probs: slate size must be >= 1");
      const int top = std::min<int>(policy.n, static_cast<int>(f));
      std::vector<int> ranked = feasible;  // ties: ascending item id
      std::stable_sort(ranked.begin(), ranked.end(), [&](int a, int b) {
        return predict(params, user, a) > predict(params, user, b);
      });
      for (int i : feasible) probs[i] = policy.epsilon / f;
      for (int r = 0; r < top; ++r)
        probs[ranked[r]] += (1.0 - policy.epsilon) / top;
      break;
    }
    case PolicyKind::softmax: {
      require(policy.tau > 0.0, "policy_probs: tau must be positive");
      double max_score = -std::numeric_limits<double>::infinity();
      for (int i : feasible)
        max_score = std::max(max_score, predict(params, user, i));
      double total = 0.0;
      for (int i : feasible) {
        probs[i] = std::exp((predict(params, user, i) - max_score) /
                            policy.tau);
        total += probs[i];
      }
      for (int i : feasible) probs[i] /= total;
      break;
    }
    case PolicyKind::pan_exposure:
      throw std::invalid_argument(
          "policy_probs: pan_exposure is environment-driven; use "
          "exposure_probs_pan");
  }
  return probs;
}

std::pair<RecommendationMatrix, PropensityLog> recommend(
    const Policy& policy, const LatentParams& params,
    const InteractionHistory& history, SeededRng& rng,
    const ExclusionMask& excluded) {
  require(policy.n == history.recs_per_user(),
          "recommend: slate size must match the history's recs_per_user");
  return recommend_from(
      [&](int user) {
        return policy_probs(policy, params, history, user, excluded);
      },
      policy.n, history, rng);
}

std::pair<RecommendationMatrix, PropensityLog> recommend_from(
    const std::function<Vec(int user)>& probs_for_user, int slate_size,
    const InteractionHistory& history, SeededRng& rng) {
  require(slate_size == history.recs_per_user(),
          "recommend: slate size must match the history's recs_per_user");
  const int users = history.users();
  const int items = history.items();
  const int step = history.horizon() + 1;

  RecommendationMatrix recs{BinaryMat::Zero(users, items), step};
  PropensityLog log;
  log.timestep = step;
  Mat table;
  if (slate_size == 1) table = Mat::Zero(users, items);

  for (int u = 0; u < users; ++u) {
    Vec probs = probs_for_user(u);
    require(probs.size() == items,
            "recommend: per-user distribution has wrong length");
    require(probs.minCoeff() >= 0.0,
            "recommend: per-user distribution has a negative entry");
    const double mass = probs.sum();
    require(mass > 0.0, "recommend: per-user distribution has no mass");
    probs /= mass;  // accept unnormalized weights, log true probabilities
    if (slate_size == 1) table.row(u) = probs.transpose();

    // Probability that each item ends up in the slate.  Exact for n = 1
    // (the policy probability itself) and n = 2 (inclusion probability of
    // sequential draws without replacement); for larger slates the
    // conditional draw probability is logged instead.
    Vec inclusion = probs;
    if (slate_size == 2) {
      double ratio_sum = 0.0;
      for (int i = 0; i < items; ++i)
        if (probs[i] > 0.0 && probs[i] < 1.0)
          ratio_sum += probs[i] / (1.0 - probs[i]);
      for (int i = 0; i < items; ++i)
        if (probs[i] > 0.0 && probs[i] < 1.0)
          inclusion[i] =
              probs[i] * (1.0 + ratio_sum - probs[i] / (1.0 - probs[i]));
    }

    Vec remaining = probs;
    for (int draw = 0; draw < slate_size; ++draw) {
      const double total = remaining.sum();
      require(total > 0.0, "recommend: policy ran out of probability mass");
      const double target = rng.uniform() * total;
      double acc = 0.0;
      int chosen = -1;
      for (int i = 0; i < items; ++i) {
        if (remaining[i] <= 0.0) continue;
        acc += remaining[i];
        chosen = i;
        if (acc >= target) break;
      }
      require(chosen >= 0, "recommend: sampling failed");
      recs.entries(u, chosen) = 1;
      const double logged =
          slate_size <= 2 ? inclusion[chosen] : remaining[chosen] / total;
      log.records.push_back(PropensityRecord{step, u, chosen,
                                             std::min(1.0, logged)});
      remaining[chosen] = 0.0;
    }
  }
  if (slate_size == 1) log.full_table = std::move(table);
  return {std::move(recs), std::move(log)};
}

}  // namespace feedloop
