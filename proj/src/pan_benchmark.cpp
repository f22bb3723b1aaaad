#include "feedloop/pan_benchmark.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <stdexcept>
#include <thread>

#include "feedloop/environments.hpp"
#include "feedloop/estimators.hpp"
#include "feedloop/history_io.hpp"
#include "feedloop/metrics.hpp"
#include "feedloop/recommenders.hpp"
#include "feedloop/stats.hpp"

namespace feedloop {

namespace {

constexpr std::uint64_t kEnvStream = 0;
constexpr std::uint64_t kSimStream = 1;
constexpr std::uint64_t kTestStream = 2;
constexpr std::uint64_t kFitStream = 3;

// Inverse empirical item frequency, normalized so the weights average to
// one (a pure reweighting, comparable in scale to unit weights).
WeightAssignment popularity_weights(const InteractionHistory& history) {
  WeightAssignment assignment = naive_weights(history);
  std::vector<int> counts(history.items(), 0);
  for (const WeightedObservation& w : assignment.weights) ++counts[w.item];
  double total = 0.0;
  for (WeightedObservation& w : assignment.weights) {
    w.weight = 1.0 / counts[w.item];
    total += w.weight;
  }
  const double scale = static_cast<double>(assignment.weights.size()) / total;
  for (WeightedObservation& w : assignment.weights) w.weight *= scale;
  return assignment;
}

WeightAssignment scheme_weights(const std::string& scheme,
                                const ExperimentConfig& cfg,
                                const InteractionHistory& history) {
  if (scheme == "naive") return naive_weights(history);
  if (scheme == "popularity") return popularity_weights(history);
  if (scheme == "cafl") {
    if (cfg.adjusted_scheme == WeightScheme::cafl_general)
      return cafl_general_weights(history);
    return cafl_special_weights(history);
  }
  throw std::invalid_argument("pan benchmark: unknown scheme " + scheme);
}

struct PanTestPoint {
  int user = 0, item = 0;
  double rating = 0.0;  // freshly sampled, not the mean
};

struct RepResult {
  // metric -> per-scheme value, schemes in configured order.
  std::map<std::string, std::vector<double>> values;
};

RepResult run_replication(const ExperimentConfig& cfg, int rep) {
  SeededRng rep_rng(cfg.seed, static_cast<std::uint64_t>(rep));
  SeededRng env_rng = rep_rng.derive(kEnvStream);
  SeededRng sim_rng = rep_rng.derive(kSimStream);
  SeededRng test_rng = rep_rng.derive(kTestStream);
  SeededRng fit_rng = rep_rng.derive(kFitStream);

  const DirichletEnv env(cfg.dirichlet, std::move(env_rng));
  const Environment wrapped{env};
  const int users = env.users();
  const int items = env.items();

  InteractionHistory history(users, items, 1, /*no_repeat=*/true);
  for (int t = 1; t <= cfg.horizon; ++t) {
    auto [recs, log] = recommend_from(
        [&](int user) {
          if (t == 1) return Vec(Vec::Ones(items) / items);
          return exposure_probs_pan(env, history, user);
        },
        1, history, sim_rng);
    history.record_step(recs, rate_step(wrapped, recs, sim_rng), log);
  }

  // Held-out set: distinct unconsumed items per user, scored against a
  // fresh rating draw rather than the pair's mean.
  if (cfg.pan_test_per_user > items - cfg.horizon)
    throw std::invalid_argument(
        "pan benchmark: not enough unconsumed items per user for the test "
        "set");
  std::vector<PanTestPoint> test;
  test.reserve(static_cast<std::size_t>(users) * cfg.pan_test_per_user);
  for (int u = 0; u < users; ++u) {
    std::vector<int> pool;
    for (int i = 0; i < items; ++i)
      if (!history.consumed(u, i)) pool.push_back(i);
    for (int draw = 0; draw < cfg.pan_test_per_user; ++draw) {
      const std::size_t pick = test_rng.uniform_index(pool.size());
      const int item = pool[pick];
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
      test.push_back(
          PanTestPoint{u, item, env_sample_rating(wrapped, u, item, test_rng)});
    }
  }

  RepResult result;
  for (const std::string& scheme : cfg.pan_schemes) {
    const WeightAssignment weights = scheme_weights(scheme, cfg, history);
    // Every scheme trains from the same initialization and batch order so
    // differences trace back to the weights alone.
    const LatentParams params =
        fit_weighted_sgd(history, weights, cfg.model, fit_rng);
    std::vector<double> predicted, truth;
    predicted.reserve(test.size());
    truth.reserve(test.size());
    for (const PanTestPoint& p : test) {
      predicted.push_back(predict(params, p.user, p.item));
      truth.push_back(p.rating);
    }
    const auto [mse, mae] = mse_mae(predicted, truth);
    result.values["mse"].push_back(mse);
    result.values["mae"].push_back(mae);
  }
  return result;
}

}  // namespace

PanReport run_pan_benchmark(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.env_kind != EnvKind::dirichlet)
    throw std::invalid_argument(
        "pan benchmark: requires the dirichlet environment");
  if (cfg.pan_schemes.empty())
    throw std::invalid_argument("pan benchmark: no schemes selected");

  std::vector<RepResult> per_rep(cfg.replications);
  const int workers = std::max(1u, std::thread::hardware_concurrency());
  for (int start = 0; start < cfg.replications; start += workers) {
    const int end = std::min(cfg.replications, start + workers);
    std::vector<std::future<RepResult>> batch;
    for (int rep = start; rep < end; ++rep)
      batch.push_back(std::async(std::launch::async, run_replication,
                                 std::cref(cfg), rep));
    for (int rep = start; rep < end; ++rep)
      per_rep[rep] = batch[rep - start].get();
  }

  PanReport report;
  for (std::size_t s = 0; s < cfg.pan_schemes.size(); ++s) {
    const std::string& scheme = cfg.pan_schemes[s];
    for (int rep = 0; rep < cfg.replications; ++rep)
      for (const char* metric : {"mse", "mae"})
        report.rows.push_back(
            PanRow{scheme, rep, metric, per_rep[rep].values.at(metric)[s]});
    for (const char* metric : {"mse", "mae"}) {
      std::vector<double> values;
      for (int rep = 0; rep < cfg.replications; ++rep)
        values.push_back(per_rep[rep].values.at(metric)[s]);
      PanSummaryRow row{scheme, metric, mean(values), std::nullopt};
      if (values.size() >= 2)
        row.ci_halfwidth = ci_halfwidth(values, cfg.ci_tdist);
      report.summary.push_back(row);
    }
  }
  return report;
}

void write_pan_csv(const PanReport& report, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream out(out_dir + "/pan_metrics.csv", std::ios::binary);
    if (!out)
      throw std::runtime_error("pan benchmark: cannot open pan_metrics.csv");
    out << "scheme,replication,metric,value\n";
    for (const PanRow& r : report.rows)
      out << r.scheme << ',' << r.replication << ',' << r.metric << ','
          << format_double(r.value) << '\n';
  }
  {
    std::ofstream out(out_dir + "/pan_summary.csv", std::ios::binary);
    if (!out)
      throw std::runtime_error("pan benchmark: cannot open pan_summary.csv");
    out << "scheme,metric,mean,ci_halfwidth\n";
    for (const PanSummaryRow& r : report.summary) {
      out << r.scheme << ',' << r.metric << ',' << format_double(r.mean)
          << ',';
      if (r.ci_halfwidth) out << format_double(*r.ci_halfwidth);
      out << '\n';
    }
  }
}

}  // namespace feedloop
