#pragma once

#include <optional>
#include <string>
#include <vector>

#include "feedloop/config.hpp"

namespace feedloop {

// One metric value from one scheme in one replication of the exposure
// benchmark (metric is "mse" or "mae").
struct PanRow {
  std::string scheme;
  int replication = 0;  // 0-based
  std::string metric;
  double value = 0.0;
};

struct PanSummaryRow {
  std::string scheme;
  std::string metric;
  double mean = 0.0;
  std::optional<double> ci_halfwidth;  // absent when replications == 1
};

struct PanReport {
  std::vector<PanRow> rows;        // scheme-major, then replication, metric
  std::vector<PanSummaryRow> summary;
};

// Exposure-driven benchmark: a popularity-boosted consumption process (not
// the model's own policy) generates `horizon` one-item-per-user steps in
// the topic-mixture environment; every configured weighting scheme then
// trains the same stochastic-gradient factorization on that one shared
// history — only the per-observation weights differ — and is scored by
// MSE/MAE against freshly sampled ratings of `pan_test_per_user` held-out
// items per user.  Schemes: "naive" (unit weights), "popularity" (inverse
// empirical item frequency, normalized to mean one), "cafl" (the
// configured adjusted scheme).  Replications are paired: one environment,
// history, test set, and model initialization per replication.
PanReport run_pan_benchmark(const ExperimentConfig& config);

// pan_metrics.csv: scheme,replication,metric,value
// pan_summary.csv: scheme,metric,mean,ci_halfwidth
void write_pan_csv(const PanReport& report, const std::string& out_dir);

}  // namespace feedloop
