#include "feedloop/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <stdexcept>
#include <thread>

#include "feedloop/history_io.hpp"
#include "feedloop/stats.hpp"

namespace feedloop {

namespace {

// Substream layout per replication.  Arm blocks are keyed by the arm's
// enum value, not its position in the config, so adding or removing arms
// never perturbs the draws of the remaining ones.
constexpr std::uint64_t kEnvStream = 0;
constexpr std::uint64_t kTestStream = 1;
constexpr std::uint64_t kStep1Stream = 2;
constexpr std::uint64_t kArmBase = 16;
constexpr std::uint64_t kArmSpan = 4;

SeededRng arm_stream(const SeededRng& rep_rng, Arm arm, std::uint64_t slot) {
  return rep_rng.derive(kArmBase + static_cast<std::uint64_t>(arm) * kArmSpan +
                        slot);
}

WeightScheme scheme_for(const ExperimentConfig& cfg, Arm arm) {
  switch (arm) {
    case Arm::feedback: return WeightScheme::naive;
    case Arm::cafl: return cfg.adjusted_scheme;
    case Arm::ipw: return WeightScheme::ipw;
    case Arm::uniform: return WeightScheme::naive;
    case Arm::shadow: return WeightScheme::naive;
  }
  throw std::logic_error("unknown arm");
}

WeightAssignment weights_for(WeightScheme scheme,
                             const InteractionHistory& history) {
  switch (scheme) {
    case WeightScheme::naive: return naive_weights(history);
    case WeightScheme::ipw: return ipw_weights(history);
    case WeightScheme::cafl_general: return cafl_general_weights(history);
    case WeightScheme::cafl_special: return cafl_special_weights(history);
  }
  throw std::logic_error("unknown weight scheme");
}

// Rescale weights to mean 1 before fitting.  The argmin of the weighted
// ridge objective is invariant to a common weight scale only if lambda is
// scaled along; normalizing instead keeps the effective regularization
// identical across schemes, so arm comparisons measure the reweighting,
// not an accidental change in ridge strength.  (Unit weights are already
// normalized, and estimator-module semantics are untouched.)
WeightAssignment normalized_for_fit(WeightAssignment weights) {
  if (weights.weights.empty()) return weights;
  double total = 0.0;
  for (const WeightedObservation& w : weights.weights) total += w.weight;
  if (total <= 0.0) return weights;
  const double scale = static_cast<double>(weights.weights.size()) / total;
  for (WeightedObservation& w : weights.weights) w.weight *= scale;
  return weights;
}

LatentParams fit_model(const ExperimentConfig& cfg,
                       const InteractionHistory& history,
                       const WeightAssignment& weights, SeededRng rng) {
  if (cfg.model_kind == ModelKind::als)
    return fit_weighted_als(history, weights, cfg.model, std::move(rng));
  return fit_weighted_sgd(history, weights, cfg.model, std::move(rng));
}

// The distribution the arm samples recommendations from at steps >= 2.
Vec arm_step_distribution(const ExperimentConfig& cfg, const Environment& env,
                          Arm arm, const LatentParams& params,
                          const InteractionHistory& history, int user,
                          const ExclusionMask& excluded) {
  if (arm == Arm::uniform || arm == Arm::shadow) {
    Policy uniform;
    uniform.kind = PolicyKind::uniform_random;
    uniform.n = cfg.policy.n;
    return policy_probs(uniform, params, history, user, excluded);
  }
  if (cfg.policy.kind == PolicyKind::pan_exposure) {
    const auto* dirichlet = std::get_if<DirichletEnv>(&env);
    if (!dirichlet)
      throw std::invalid_argument(
          "policy pan requires the dirichlet environment");
    // The exposure process ignores the exclusion mask's test pairs only if
    // told to; zero them out and renormalize to keep test pairs unseen.
    Vec probs = exposure_probs_pan(*dirichlet, history, user);
    if (!excluded.empty()) {
      for (int i = 0; i < history.items(); ++i)
        if (excluded[static_cast<std::size_t>(user) * history.items() + i])
          probs[i] = 0.0;
      const double total = probs.sum();
      if (total <= 0.0)
        throw std::runtime_error("pan exposure: user exhausted");
      probs /= total;
    }
    return probs;
  }
  return policy_probs(cfg.policy, params, history, user, excluded);
}

// Sample one recommendation step for the arm, rate it, and append it.
void sample_step(const ExperimentConfig& cfg, const Environment& env, Arm arm,
                 const LatentParams& params, InteractionHistory& history,
                 const ExclusionMask& excluded, SeededRng& policy_rng,
                 SeededRng& rating_rng, RecommendationMatrix* out_recs) {
  auto [recs, log] = recommend_from(
      [&](int user) {
        return arm_step_distribution(cfg, env, arm, params, history, user,
                                     excluded);
      },
      cfg.policy.n, history, policy_rng);
  RatingMatrix ratings = rate_step(env, recs, rating_rng);
  history.record_step(recs, ratings, log);
  if (out_recs) *out_recs = std::move(recs);
}

struct EvalData {
  std::vector<double> predicted, truth;
  // Per-user test item/rating lists for ranking metrics.
  std::vector<std::vector<int>> user_items;
  std::vector<std::vector<double>> user_ratings;
};

EvalData prepare_eval(const TestSet& test, int users) {
  EvalData data;
  data.user_items.resize(users);
  data.user_ratings.resize(users);
  for (const TestPoint& p : test.points) {
    data.user_items[p.user].push_back(p.item);
    data.user_ratings[p.user].push_back(p.rating);
  }
  return data;
}

void evaluate_step(const ExperimentConfig& cfg, const TestSet& test,
                   const EvalData& base, const LatentParams& params,
                   const std::vector<std::vector<int>>& cumulative_sets,
                   MetricSeries& series) {
  std::vector<double> predicted, truth;
  predicted.reserve(test.points.size());
  truth.reserve(test.points.size());
  for (const TestPoint& p : test.points) {
    predicted.push_back(predict(params, p.user, p.item));
    truth.push_back(p.rating);
  }
  series.values["rmse"].push_back(rmse(predicted, truth));
  const auto [mse, mae] = mse_mae(predicted, truth);
  series.values["mse"].push_back(mse);
  series.values["mae"].push_back(mae);

  // NDCG per user over that user's test items, averaged over users that
  // have any; k spans all of a user's test items.
  double ndcg_acc = 0.0;
  int ndcg_users = 0;
  for (std::size_t u = 0; u < base.user_items.size(); ++u) {
    const auto& items = base.user_items[u];
    if (items.empty()) continue;
    std::vector<int> order(items.size());
    for (std::size_t j = 0; j < order.size(); ++j) order[j] = static_cast<int>(j);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return predict(params, static_cast<int>(u), items[a]) >
             predict(params, static_cast<int>(u), items[b]);
    });
    std::vector<double> gains(items.size());
    for (std::size_t j = 0; j < order.size(); ++j)
      gains[j] = base.user_ratings[u][order[j]];
    std::vector<double> ideal = base.user_ratings[u];
    std::sort(ideal.begin(), ideal.end(), std::greater<double>());
    ndcg_acc += ndcg_at_k(gains, ideal, static_cast<int>(items.size()));
    ++ndcg_users;
  }
  if (ndcg_users == 0)
    throw std::runtime_error("evaluate: no user has test items");
  series.values["ndcg"].push_back(ndcg_acc / ndcg_users);

  series.values["jaccard"].push_back(homogenization(cumulative_sets));
  (void)cfg;
}

}  // namespace

Environment make_environment(const ExperimentConfig& config, SeededRng rng) {
  if (config.env_kind == EnvKind::latent)
    return Environment{LatentFactorEnv(config.latent, std::move(rng))};
  return Environment{DirichletEnv(config.dirichlet, std::move(rng))};
}

std::pair<TestSet, ExclusionMask> sample_test_set(const ExperimentConfig& cfg,
                                                  const Environment& env,
                                                  SeededRng& rng) {
  const int users = env_users(env);
  const int items = env_items(env);
  const std::size_t total = static_cast<std::size_t>(users) * items;
  // Keep enough feasible items per user for every recommendation step.
  const int per_user_cap =
      items - (cfg.no_repeat ? cfg.horizon * cfg.policy.n : cfg.policy.n) - 1;
  if (per_user_cap <= 0)
    throw std::invalid_argument(
        "test set: horizon leaves no room for held-out items");
  if (static_cast<std::size_t>(cfg.test_size) > total / 2)
    throw std::invalid_argument("test set: test_size too large");

  TestSet test;
  ExclusionMask mask(total, 0);
  std::vector<int> per_user(users, 0);
  while (test.points.size() < static_cast<std::size_t>(cfg.test_size)) {
    const int u = static_cast<int>(rng.uniform_index(users));
    const int i = static_cast<int>(rng.uniform_index(items));
    const std::size_t flat = static_cast<std::size_t>(u) * items + i;
    if (mask[flat] || per_user[u] >= per_user_cap) continue;
    mask[flat] = 1;
    ++per_user[u];
    test.points.push_back(TestPoint{u, i, env_true_rating(env, u, i)});
  }
  // Deterministic evaluation order regardless of draw order.
  std::sort(test.points.begin(), test.points.end(),
            [](const TestPoint& a, const TestPoint& b) {
              return std::tie(a.user, a.item) < std::tie(b.user, b.item);
            });
  return {std::move(test), std::move(mask)};
}

MetricSeries run_arm(const ExperimentConfig& cfg, const Environment& env,
                     Arm arm, int replication, const TestSet& test,
                     const ExclusionMask& excluded,
                     const RecommendationMatrix& step1_recs,
                     const RatingMatrix& step1_ratings,
                     const PropensityLog& step1_props, SeededRng rep_rng,
                     const RunOptions& options) {
  MetricSeries series;
  series.arm = arm_name(arm);
  series.replication = replication;

  SeededRng policy_rng = arm_stream(rep_rng, arm, 0);
  SeededRng rating_rng = arm_stream(rep_rng, arm, 1);
  SeededRng fit_rng = arm_stream(rep_rng, arm, 2);
  SeededRng metric_rng = arm_stream(rep_rng, arm, 3);
  (void)metric_rng;

  InteractionHistory history(env_users(env), env_items(env), cfg.policy.n,
                             cfg.no_repeat);
  const EvalData base = prepare_eval(test, history.users());

  // Cumulative per-user recommended sets for the homogenization metric.
  // The uniform arm's observations are random by design; its metric sets
  // come from what the fitted model would recommend instead.
  std::vector<std::vector<int>> cumulative(history.users());
  const bool hypothetical_sets = arm == Arm::uniform;

  LatentParams params;
  WeightAssignment last_weights;
  for (int t = 1; t <= cfg.horizon; ++t) {
    RecommendationMatrix recs;
    if (t == 1) {
      history.record_step(step1_recs, step1_ratings, step1_props);
      recs = step1_recs;
    } else {
      sample_step(cfg, env, arm, params, history, excluded, policy_rng,
                  rating_rng, &recs);
    }
    if (!hypothetical_sets)
      for (int u = 0; u < history.users(); ++u)
        for (int i = 0; i < history.items(); ++i)
          if (recs.entries(u, i) == 1) cumulative[u].push_back(i);

    // Refit at step 1 (the first model must exist) and then on schedule.
    if (t == 1 || t % cfg.retrain_every == 0) {
      last_weights = weights_for(scheme_for(cfg, arm), history);
      params = fit_model(cfg, history, normalized_for_fit(last_weights),
                         fit_rng.derive(t));
    }

    if (hypothetical_sets) {
      // Top-n by the current model over feasible items (ties: low id).
      for (int u = 0; u < history.users(); ++u) {
        std::vector<int> feasible;
        for (int i = 0; i < history.items(); ++i) {
          if (history.consumed(u, i)) continue;
          if (!excluded.empty() &&
              excluded[static_cast<std::size_t>(u) * history.items() + i])
            continue;
          feasible.push_back(i);
        }
        const int top = std::min<int>(cfg.policy.n,
                                      static_cast<int>(feasible.size()));
        std::stable_sort(feasible.begin(), feasible.end(), [&](int a, int b) {
          return predict(params, u, a) > predict(params, u, b);
        });
        for (int r = 0; r < top; ++r) cumulative[u].push_back(feasible[r]);
      }
    }

    evaluate_step(cfg, test, base, params, cumulative, series);
  }

  if (!options.dump_dir.empty() && (options.dump_history ||
                                    options.dump_weights)) {
    std::filesystem::create_directories(options.dump_dir);
    const std::string stem = options.dump_dir + "/" + series.arm + "_rep" +
                             std::to_string(replication);
    if (options.dump_history)
      write_history_file(stem + "_history.log", history, rep_rng.seed());
    if (options.dump_weights)
      write_weights_file(stem + "_weights.log", last_weights);
  }
  return series;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg,
                                const RunOptions& options) {
  cfg.validate();
  ExperimentReport report;

  // One self-contained job per replication.  Replications run in parallel
  // but results are assembled in replication order, so the report (and
  // the CSVs derived from it) never depends on scheduling.
  auto run_one = [&cfg, &options](int rep) {
    SeededRng rep_rng(cfg.seed, static_cast<std::uint64_t>(rep));
    SeededRng env_rng = rep_rng.derive(kEnvStream);
    SeededRng test_rng = rep_rng.derive(kTestStream);
    SeededRng step1_rng = rep_rng.derive(kStep1Stream);

    const Environment env = make_environment(cfg, env_rng);
    auto [test, excluded] = sample_test_set(cfg, env, test_rng);

    // Shared step-1 randomization: one uniform slate per user, one rating
    // draw, reused verbatim by every arm.
    InteractionHistory fresh(env_users(env), env_items(env), cfg.policy.n,
                             cfg.no_repeat);
    Policy uniform;
    uniform.kind = PolicyKind::uniform_random;
    uniform.n = cfg.policy.n;
    LatentParams no_params;
    auto [recs1, props1] = recommend(uniform, no_params, fresh, step1_rng,
                                     excluded);
    const RatingMatrix ratings1 = rate_step(env, recs1, step1_rng);

    // Arms run in the configured order but draw from enum-keyed streams.
    std::vector<MetricSeries> series;
    for (Arm arm : cfg.arms)
      series.push_back(run_arm(cfg, env, arm, rep, test, excluded, recs1,
                               ratings1, props1, rep_rng, options));
    return series;
  };

  std::vector<std::vector<MetricSeries>> per_rep(cfg.replications);
  const int workers = std::max(1u, std::thread::hardware_concurrency());
  for (int start = 0; start < cfg.replications; start += workers) {
    const int end = std::min(cfg.replications, start + workers);
    std::vector<std::future<std::vector<MetricSeries>>> batch;
    for (int rep = start; rep < end; ++rep)
      batch.push_back(std::async(std::launch::async, run_one, rep));
    for (int rep = start; rep < end; ++rep)
      per_rep[rep] = batch[rep - start].get();
  }
  std::vector<MetricSeries> all_series;
  for (std::vector<MetricSeries>& batch : per_rep)
    for (MetricSeries& s : batch) all_series.push_back(std::move(s));

  // Fill in feedback-effect gaps against the shadow arm when present.
  std::map<int, const MetricSeries*> shadow_of_rep;
  for (const MetricSeries& s : all_series)
    if (s.arm == arm_name(Arm::shadow)) shadow_of_rep[s.replication] = &s;
  for (MetricSeries& s : all_series) {
    if (shadow_of_rep.empty()) break;
    const auto it = shadow_of_rep.find(s.replication);
    if (it == shadow_of_rep.end()) continue;
    const MetricSeries& shadow = *it->second;
    for (const char* metric : {"rmse", "ndcg"}) {
      const auto& own = s.values.at(metric);
      const auto& ref = shadow.values.at(metric);
      std::vector<double> gap(own.size());
      for (std::size_t t = 0; t < own.size(); ++t)
        gap[t] = feedback_effect(own[t], ref[t]);
      s.values[std::string("feedback_") + metric] = std::move(gap);
    }
  }

  // Rows: arm in configured order, then replication, timestep, metric.
  for (Arm arm : cfg.arms) {
    const std::string name = arm_name(arm);
    for (const MetricSeries& s : all_series) {
      if (s.arm != name) continue;
      for (int t = 1; t <= cfg.horizon; ++t)
        for (const auto& [metric, values] : s.values)
          report.rows.push_back(
              MetricRow{s.arm, s.replication, t, metric, values[t - 1]});
    }
  }

  // Summaries: configured arm order, then timestep, then metric name.
  for (Arm arm : cfg.arms) {
    const std::string name = arm_name(arm);
    const MetricSeries* first = nullptr;
    for (const MetricSeries& s : all_series)
      if (s.arm == name) {
        first = &s;
        break;
      }
    if (!first) continue;
    for (int t = 1; t <= cfg.horizon; ++t)
      for (const auto& [metric, _] : first->values) {
        std::vector<double> values;
        for (const MetricSeries& s : all_series)
          if (s.arm == name) values.push_back(s.values.at(metric)[t - 1]);
        SummaryRow row{name, t, metric, mean(values), std::nullopt};
        if (values.size() >= 2)
          row.ci_halfwidth = ci_halfwidth(values, cfg.ci_tdist);
        report.summary.push_back(row);
      }
  }
  return report;
}

void write_csv(const ExperimentReport& report, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream out(out_dir + "/metrics.csv", std::ios::binary);
    if (!out) throw std::runtime_error("write_csv: cannot open metrics.csv");
    out << "arm,replication,timestep,metric,value\n";
    for (const MetricRow& r : report.rows)
      out << r.arm << ',' << r.replication << ',' << r.timestep << ','
          << r.metric << ',' << format_double(r.value) << '\n';
  }
  {
    std::ofstream out(out_dir + "/summary.csv", std::ios::binary);
    if (!out) throw std::runtime_error("write_csv: cannot open summary.csv");
    out << "arm,timestep,metric,mean,ci_halfwidth\n";
    for (const SummaryRow& r : report.summary) {
      out << r.arm << ',' << r.timestep << ',' << r.metric << ','
          << format_double(r.mean) << ',';
      if (r.ci_halfwidth) out << format_double(*r.ci_halfwidth);
      out << '\n';
    }
  }
}

}  // namespace feedloop
