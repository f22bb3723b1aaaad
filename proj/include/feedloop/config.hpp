#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "feedloop/environments.hpp"
#include "feedloop/recommenders.hpp"

namespace feedloop {

enum class EnvKind { latent, dirichlet };
enum class ModelKind { als, sgd };
enum class Arm { feedback, cafl, ipw, uniform, shadow };

std::string arm_name(Arm arm);

// Full description of a closed-loop experiment.  Parsed from an INI-style
// key = value file with [environment], [model], [policy] and [experiment]
// sections; unknown sections or keys are errors so typos cannot silently
// fall back to defaults.
struct ExperimentConfig {
  EnvKind env_kind = EnvKind::latent;
  LatentFactorEnvConfig latent;
  DirichletEnvConfig dirichlet;

  ModelKind model_kind = ModelKind::als;
  MFConfig model;

  Policy policy;             // per-arm policies derive from this
  bool no_repeat = true;

  int horizon = 50;          // closed-loop steps T
  int retrain_every = 1;     // steps between refits
  int test_size = 1000;      // held-out pairs for the run subcommand
  int replications = 10;
  std::uint64_t seed = 20240501;
  std::vector<Arm> arms = {Arm::feedback, Arm::cafl, Arm::uniform,
                           Arm::shadow};
  // Weighting scheme used by the adjusted arm (the arm named "cafl").
  WeightScheme adjusted_scheme = WeightScheme::cafl_special;
  bool ci_tdist = false;     // t-quantile CIs instead of 1.96

  // Benchmark-specific knobs (pan-bench subcommand).
  std::vector<std::string> pan_schemes = {"naive", "popularity", "cafl"};
  int pan_test_per_user = 20;

  void validate() const;
};

ExperimentConfig parse_config(std::istream& in, const std::string& name);
ExperimentConfig parse_config_file(const std::string& path);

}  // namespace feedloop
