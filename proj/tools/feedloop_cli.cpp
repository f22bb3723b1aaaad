// Command-line front end for the closed-loop simulator.
//
//   feedloop run --config <file> --out <dir> [--arms a,b,c] [--reps N]
//                [--seed S] [--dump-history] [--dump-weights]
//   feedloop pan-bench --config <file> --out <dir>
//   feedloop oracle-check [--size small]
//
// Exit code 0 on success; nonzero with a one-line diagnostic on stderr for
// any error (bad config, infeasible run, I/O failure, failed oracle).
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "feedloop/config.hpp"
#include "feedloop/enumeration.hpp"
#include "feedloop/experiment.hpp"
#include "feedloop/pan_benchmark.hpp"

namespace {

feedloop::Arm parse_arm(const std::string& name) {
  if (name == "feedback") return feedloop::Arm::feedback;
  if (name == "cafl") return feedloop::Arm::cafl;
  if (name == "ipw") return feedloop::Arm::ipw;
  if (name == "uniform") return feedloop::Arm::uniform;
  if (name == "shadow" || name == "random_shadow")
    return feedloop::Arm::shadow;
  throw std::invalid_argument(
      "unknown arm '" + name +
      "' (expected feedback, cafl, ipw, uniform or shadow)");
}

int run_command(const std::string& config_path, const std::string& out_dir,
                const std::vector<std::string>& arms, int reps,
                std::int64_t seed, bool dump_history, bool dump_weights) {
  feedloop::ExperimentConfig cfg =
      feedloop::parse_config_file(config_path);
  if (!arms.empty()) {
    cfg.arms.clear();
    for (const std::string& name : arms) cfg.arms.push_back(parse_arm(name));
  }
  if (reps > 0) cfg.replications = reps;
  if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);

  feedloop::RunOptions options;
  if (dump_history || dump_weights) {
    options.dump_dir = out_dir;
    options.dump_history = dump_history;
    options.dump_weights = dump_weights;
  }

  const feedloop::ExperimentReport report =
      feedloop::run_experiment(cfg, options);
  feedloop::write_csv(report, out_dir);
  std::cout << "wrote " << report.rows.size() << " metric rows to " << out_dir
            << "/metrics.csv (+ summary.csv)\n";
  return 0;
}

int pan_bench_command(const std::string& config_path,
                      const std::string& out_dir) {
  const feedloop::ExperimentConfig cfg =
      feedloop::parse_config_file(config_path);
  const feedloop::PanReport report = feedloop::run_pan_benchmark(cfg);
  feedloop::write_pan_csv(report, out_dir);
  for (const feedloop::PanSummaryRow& row : report.summary) {
    std::cout << row.scheme << " " << row.metric << " = " << row.mean;
    if (row.ci_halfwidth) std::cout << " +/- " << *row.ci_halfwidth;
    std::cout << "\n";
  }
  std::cout << "wrote " << out_dir << "/pan_metrics.csv (+ pan_summary.csv)\n";
  return 0;
}

int oracle_check_command(const std::string& size) {
  if (size != "small")
    throw std::invalid_argument("oracle-check: unknown size '" + size +
                                "' (only 'small' is available)");
  const std::vector<feedloop::OracleCheck> checks =
      feedloop::oracle_suite(/*instances=*/20, /*seed=*/20240501);
  bool all_pass = true;
  for (const feedloop::OracleCheck& check : checks) {
    std::cout << (check.pass ? "[PASS] " : "[FAIL] ") << check.name << ": "
              << check.detail << "\n";
    all_pass = all_pass && check.pass;
  }
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"closed-loop recommender simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::vector<std::string> arms;
  int reps = 0;
  std::int64_t seed = -1;
  bool dump_history = false, dump_weights = false;

  CLI::App* run = app.add_subcommand(
      "run", "simulate the configured arms and write metric CSVs");
  run->add_option("--config", config_path, "experiment config file")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "output directory")->required();
  run->add_option("--arms", arms,
                  "override the configured arm list (comma separated)")
      ->delimiter(',');
  run->add_option("--reps", reps, "override the replication count")
      ->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "override the base seed")
      ->check(CLI::NonNegativeNumber);
  run->add_flag("--dump-history", dump_history,
                "also write per-arm history snapshots");
  run->add_flag("--dump-weights", dump_weights,
                "also write per-arm final training weights");

  std::string pan_config, pan_out;
  CLI::App* pan = app.add_subcommand(
      "pan-bench", "exposure benchmark comparing weighting schemes");
  pan->add_option("--config", pan_config, "experiment config file")
      ->required()
      ->check(CLI::ExistingFile);
  pan->add_option("--out", pan_out, "output directory")->required();

  std::string size = "small";
  CLI::App* oracle = app.add_subcommand(
      "oracle-check", "run the exact-enumeration audit and print pass/fail");
  oracle->add_option("--size", size, "audit size (small)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return run_command(config_path, out_dir, arms, reps, seed, dump_history,
                         dump_weights);
    if (pan->parsed()) return pan_bench_command(pan_config, pan_out);
    return oracle_check_command(size);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
