#pragma once

#include <optional>
#include <string>
#include <vector>

#include "feedloop/config.hpp"
#include "feedloop/metrics.hpp"

namespace feedloop {

struct MetricRow {
  std::string arm;
  int replication = 0;  // 0-based
  int timestep = 0;     // 1-based
  std::string metric;
  double value = 0.0;
};

struct SummaryRow {
  std::string arm;
  int timestep = 0;
  std::string metric;
  double mean = 0.0;
  std::optional<double> ci_halfwidth;  // present when replications >= 2
};

struct ExperimentReport {
  std::vector<MetricRow> rows;
  std::vector<SummaryRow> summary;
};

// Optional side artifacts for audits: per-arm final history snapshots and
// weight dumps, written into `dump_dir`.
struct RunOptions {
  std::string dump_dir;
  bool dump_history = false;
  bool dump_weights = false;
};

Environment make_environment(const ExperimentConfig& config, SeededRng rng);

// Distinct held-out pairs with environment reference ratings, plus the
// matching recommendation exclusion mask.  Per-user test counts are capped
// so every user keeps enough feasible items for the whole run.
std::pair<TestSet, ExclusionMask> sample_test_set(const ExperimentConfig& cfg,
                                                  const Environment& env,
                                                  SeededRng& rng);

// One arm of one replication.  All arms of a replication share the
// environment, the test set and the step-1 randomization (recommendations
// and ratings), so cross-arm comparisons are paired; they diverge from
// step 2 via arm-specific streams.
// Emitted metrics: rmse, mse, mae, ndcg, jaccard (cumulative-set
// homogenization).  feedback_* gaps are filled in by run_experiment once
// the shadow arm's series is known.
MetricSeries run_arm(const ExperimentConfig& cfg, const Environment& env,
                     Arm arm, int replication, const TestSet& test,
                     const ExclusionMask& excluded,
                     const RecommendationMatrix& step1_recs,
                     const RatingMatrix& step1_ratings,
                     const PropensityLog& step1_props, SeededRng rep_rng,
                     const RunOptions& options = {});

// Full experiment: every replication runs every configured arm; rows are
// ordered (arm as configured, replication, timestep, metric).  The summary
// aggregates over replications with 95% CI half-widths when there are at
// least two.
ExperimentReport run_experiment(const ExperimentConfig& cfg,
                                const RunOptions& options = {});

// metrics.csv: "arm,replication,timestep,metric,value".
// summary.csv: "arm,timestep,metric,mean,ci_halfwidth" (empty CI field for
// single-replication runs).  Values survive a text round-trip to at least
// 15 significant digits, files are UTF-8 and newline-terminated, and an
// empty report still produces the header line.
void write_csv(const ExperimentReport& report, const std::string& out_dir);

}  // namespace feedloop
