#include "feedloop/environments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace feedloop {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// Smallest admissible mean for a Beta spec with the given variance: shapes
// must stay comfortably positive (a, nu >= kMinShape), so means are clamped
// to keep mean*(1-mean) >= (1 + kMinShape) * variance.
constexpr double kMinShape = 0.5;

std::pair<double, double> mean_bounds(double variance) {
  const double q = (1.0 + kMinShape) * variance;
  require(q < 0.25, "beta mean clamp: variance too large for any mean");
  const double root = std::sqrt(0.25 - q);
  return {0.5 - root, 0.5 + root};
}

double clamp_mean(double mean, double variance) {
  const auto [lo, hi] = mean_bounds(variance);
  return std::clamp(mean, lo, hi);
}

}  // namespace

std::pair<double, double> beta_prime_params(const BetaPrimeSpec& spec) {
  require(spec.mean > 0.0 && spec.mean < 1.0,
          "beta_prime_params: mean must be inside (0, 1)");
  require(spec.variance > 0.0, "beta_prime_params: variance must be positive");
  const double mu = spec.mean;
  const double excess = mu * (1.0 - mu) / spec.variance - 1.0;
  require(excess > 0.0, "beta_prime_params: variance too large for mean");
  if (spec.moment_exact) {
    // a + b = excess gives variance mu*(1-mu)/(a+b+1) = variance exactly.
    return {mu * excess, (1.0 - mu) * excess};
  }
  // Mean-only parameterization: a itself is the excess; the mean is exactly
  // mu but the realized variance is mu*(1-mu)/(a/mu + 1).
  const double a = excess;
  const double b = a * (1.0 / mu - 1.0);
  return {a, b};
}

DirichletEnv::DirichletEnv(const DirichletEnvConfig& config, SeededRng rng)
    : config_(config) {
  require(config.users > 0 && config.items > 0,
          "dirichlet env: users and items must be positive");
  require(config.k >= 2, "dirichlet env: need at least two topics");
  require(config.rating_variance > 0.0,
          "dirichlet env: rating variance must be positive");
  require(config.user_concentration > 0.0 && config.item_concentration > 0.0,
          "dirichlet env: concentrations must be positive");
  require(config.boost >= 1.0, "dirichlet env: boost must be >= 1");
  top_k_ = config.top_k;
  if (top_k_ == 0)
    top_k_ = config.items < 1000
                 ? static_cast<int>(std::ceil(0.1 * config.items))
                 : 100;
  require(top_k_ >= 1 && top_k_ <= config.items,
          "dirichlet env: top_k out of range");
  // Validate that clamped means are representable at all.
  mean_bounds(config.rating_variance);

  // Draw order is fixed: mu_theta, theta rows, mu_beta, beta rows, then S
  // row-major.  Changing it would silently change every seeded experiment.
  const Vec alpha_user = Vec::Constant(config.k, config.user_concentration);
  const Vec alpha_item = Vec::Constant(config.k, config.item_concentration);
  const Vec mu_theta = rng.dirichlet(alpha_user);
  theta_.resize(config.users, config.k);
  for (int u = 0; u < config.users; ++u)
    theta_.row(u) = rng.dirichlet(mu_theta).transpose();
  const Vec mu_beta = rng.dirichlet(alpha_item);
  beta_.resize(config.items, config.k);
  for (int i = 0; i < config.items; ++i)
    beta_.row(i) = rng.dirichlet(mu_beta).transpose();

  s_.resize(config.items, config.items);
  for (int i = 0; i < config.items; ++i)
    for (int j = 0; j < config.items; ++j) {
      BetaPrimeSpec spec;
      spec.mean = clamp_mean(beta_.row(i).dot(beta_.row(j)),
                             config.rating_variance);
      spec.variance = config.rating_variance;
      spec.moment_exact = config.moment_exact;
      const auto [a, b] = beta_prime_params(spec);
      s_(i, j) = rng.beta(a, b);
    }
}

double DirichletEnv::rating_mean(int user, int item) const {
  require(user >= 0 && user < users() && item >= 0 && item < items(),
          "dirichlet env: index out of range");
  return clamp_mean(theta_.row(user).dot(beta_.row(item)),
                    config_.rating_variance);
}

double DirichletEnv::sample_rating(int user, int item, SeededRng& rng) const {
  BetaPrimeSpec spec;
  spec.mean = rating_mean(user, item);
  spec.variance = config_.rating_variance;
  spec.moment_exact = config_.moment_exact;
  const auto [a, b] = beta_prime_params(spec);
  return rng.beta(a, b);
}

double score_pan(const DirichletEnv& env, const InteractionHistory& history,
                 int user, int item) {
  require(history.users() == env.users() && history.items() == env.items(),
          "score_pan: history does not match environment");
  require(user >= 0 && user < env.users() && item >= 0 && item < env.items(),
          "score_pan: index out of range");
  double score = 0.0;
  for (const auto& step : history.steps())
    for (const Observation& o : step.observations) {
      if (o.user != user) continue;
      score += o.rating * std::exp(env.similarity()(item, o.item));
    }
  return score;
}

Vec exposure_probs_pan(const DirichletEnv& env,
                       const InteractionHistory& history, int user) {
  require(history.horizon() >= 1,
          "exposure_probs_pan: needs at least one recorded step (the first "
          "step is uniform)");
  const int items = env.items();
  Vec scores(items);
  for (int i = 0; i < items; ++i) scores[i] = score_pan(env, history, user, i);

  // Rank all items by score, ties broken by ascending item id.
  std::vector<int> order(items);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });

  Vec weights = Vec::Ones(items);
  for (int r = 0; r < env.top_k() && r < items; ++r)
    weights[order[r]] = env.config().boost;
  int unconsumed = 0;
  for (int i = 0; i < items; ++i) {
    if (history.consumed(user, i))
      weights[i] = 0.0;
    else
      ++unconsumed;
  }
  if (unconsumed == 0)
    throw std::runtime_error("exposure_probs_pan: user exhausted");
  return weights / weights.sum();
}

LatentFactorEnv::LatentFactorEnv(const LatentFactorEnvConfig& config,
                                 SeededRng rng)
    : config_(config) {
  require(config.users > 0 && config.items > 0,
          "latent env: users and items must be positive");
  require(config.k >= 1, "latent env: k must be >= 1");
  require(config.noise_variance >= 0.0,
          "latent env: noise variance must be nonnegative");
  require(config.clip_lo > 0.0,
          "latent env: clip_lo must be positive (zero marks unobserved)");
  require(config.clip_hi > config.clip_lo, "latent env: empty clip range");
  require(config.factor_spread > 0.0,
          "latent env: factor spread must be positive");

  // Entry mean sqrt(mid/k) puts the expected dot product at the middle of
  // the clip range; resample until >= 99% of pair means are inside it.
  const double mid = 0.5 * (config.clip_lo + config.clip_hi);
  const double entry_mean = std::sqrt(mid / config.k);
  const int max_attempts = 64;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    Mat theta(config.users, config.k), beta(config.items, config.k);
    for (int u = 0; u < config.users; ++u)
      for (int k = 0; k < config.k; ++k)
        theta(u, k) = rng.normal(entry_mean, config.factor_spread);
    for (int i = 0; i < config.items; ++i)
      for (int k = 0; k < config.k; ++k)
        beta(i, k) = rng.normal(entry_mean, config.factor_spread);
    const Mat means = theta * beta.transpose();
    const auto inside =
        ((means.array() >= config.clip_lo) && (means.array() <= config.clip_hi))
            .count();
    const double fraction =
        static_cast<double>(inside) / static_cast<double>(means.size());
    if (fraction >= 0.99) {
      truth_.user_vectors = std::move(theta);
      truth_.item_vectors = std::move(beta);
      truth_.noise_variance = config.noise_variance;
      return;
    }
  }
  throw std::runtime_error(
      "latent env: could not place 99% of expected ratings inside the clip "
      "range; reduce factor_spread or widen the range");
}

double LatentFactorEnv::true_rating(int user, int item) const {
  require(user >= 0 && user < users() && item >= 0 && item < items(),
          "latent env: index out of range");
  const double mean =
      truth_.user_vectors.row(user).dot(truth_.item_vectors.row(item));
  return std::clamp(mean, config_.clip_lo, config_.clip_hi);
}

double LatentFactorEnv::sample_rating(int user, int item,
                                      SeededRng& rng) const {
  const double mean =
      truth_.user_vectors.row(user).dot(truth_.item_vectors.row(item));
  const double noisy = rng.normal(mean, std::sqrt(config_.noise_variance));
  return std::clamp(noisy, config_.clip_lo, config_.clip_hi);
}

int env_users(const Environment& env) {
  return std::visit([](const auto& e) { return e.users(); }, env);
}

int env_items(const Environment& env) {
  return std::visit([](const auto& e) { return e.items(); }, env);
}

double env_sample_rating(const Environment& env, int user, int item,
                         SeededRng& rng) {
  return std::visit(
      [&](const auto& e) { return e.sample_rating(user, item, rng); }, env);
}

double env_true_rating(const Environment& env, int user, int item) {
  if (const auto* latent = std::get_if<LatentFactorEnv>(&env))
    return latent->true_rating(user, item);
  return std::get<DirichletEnv>(env).rating_mean(user, item);
}

RatingMatrix rate_step(const Environment& env, const RecommendationMatrix& recs,
                       SeededRng& rng) {
  const int users = env_users(env);
  const int items = env_items(env);
  require(recs.entries.rows() == users && recs.entries.cols() == items,
          "rate_step: recommendation matrix dimension mismatch");
  RatingMatrix ratings{Mat::Zero(users, items), recs.timestep};
  for (int u = 0; u < users; ++u)
    for (int i = 0; i < items; ++i)
      if (recs.entries(u, i) == 1)
        ratings.entries(u, i) = env_sample_rating(env, u, i, rng);
  return ratings;
}

}  // namespace feedloop
