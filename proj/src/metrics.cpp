#include "feedloop/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace feedloop {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

std::vector<int> sorted_unique(std::span<const int> xs) {
  std::vector<int> v(xs.begin(), xs.end());
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

double rmse(std::span<const double> predicted, std::span<const double> actual) {
  require(predicted.size() == actual.size(), "rmse: length mismatch");
  require(!predicted.empty(), "rmse: empty input");
  double acc = 0.0;
  for (std::size_t j = 0; j < predicted.size(); ++j) {
    const double d = predicted[j] - actual[j];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(predicted.size()));
}

std::pair<double, double> mse_mae(std::span<const double> predicted,
                                  std::span<const double> actual) {
  require(predicted.size() == actual.size(), "mse_mae: length mismatch");
  require(!predicted.empty(), "mse_mae: empty input");
  double se = 0.0, ae = 0.0;
  for (std::size_t j = 0; j < predicted.size(); ++j) {
    const double d = predicted[j] - actual[j];
    se += d * d;
    ae += std::abs(d);
  }
  const double n = static_cast<double>(predicted.size());
  return {se / n, ae / n};
}

double ndcg_at_k(std::span<const double> gains,
                 std::span<const double> ideal_gains, int k) {
  require(gains.size() == ideal_gains.size(), "ndcg: length mismatch");
  require(!gains.empty(), "ndcg: empty ranking");
  require(k >= 1, "ndcg: k must be >= 1");
  require(std::is_sorted(ideal_gains.begin(), ideal_gains.end(),
                         std::greater<double>()),
          "ndcg: ideal gains must be sorted descending");
  const int depth = std::min<int>(k, static_cast<int>(gains.size()));
  double dcg = 0.0, idcg = 0.0;
  for (int j = 0; j < depth; ++j) {
    const double discount = std::log2(static_cast<double>(j) + 2.0);
    dcg += gains[j] / discount;
    idcg += ideal_gains[j] / discount;
  }
  if (idcg == 0.0) return 1.0;  // nothing rankable: perfect by convention
  return dcg / idcg;
}

double jaccard(std::span<const int> a, std::span<const int> b) {
  const std::vector<int> sa = sorted_unique(a);
  const std::vector<int> sb = sorted_unique(b);
  require(!sa.empty() || !sb.empty(), "jaccard: undefined for two empty sets");
  std::vector<int> inter;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(),
                        std::back_inserter(inter));
  const std::size_t uni = sa.size() + sb.size() - inter.size();
  return static_cast<double>(inter.size()) / static_cast<double>(uni);
}

double homogenization(const InteractionHistory& history, int timestep) {
  require(timestep >= 1 && timestep <= history.horizon(),
          "homogenization: timestep out of range");
  std::vector<std::vector<int>> sets(history.users());
  for (int s = 0; s < timestep; ++s)
    for (const Observation& o : history.steps()[s].observations)
      sets[o.user].push_back(o.item);
  return homogenization(sets);
}

double homogenization(const std::vector<std::vector<int>>& user_sets) {
  require(user_sets.size() >= 2, "homogenization: need at least two users");
  double acc = 0.0;
  std::size_t pairs = 0;
  for (std::size_t u = 0; u < user_sets.size(); ++u)
    for (std::size_t v = u + 1; v < user_sets.size(); ++v) {
      acc += jaccard(user_sets[u], user_sets[v]);
      ++pairs;
    }
  return acc / static_cast<double>(pairs);
}

double feedback_effect(double metric_actual, double metric_shadow) {
  return metric_actual - metric_shadow;
}

}  // namespace feedloop
