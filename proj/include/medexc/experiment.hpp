#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "medexc/estimator.hpp"

namespace medexc {

// One Monte Carlo cell: a generator, a nuisance scenario, and an estimand
// configuration, replicated with independent datasets.
//
// Scenarios by generator:
//   gm1: exact | perturbed | fitted | mr-i | mr-ii | mr-iii | mr-iv | mr-none
//   gm2: s1 | s2 | s3 | s4
struct PlanCell {
  std::string generator = "gm1";
  std::string scenario = "exact";
  int n = 0;
  int replicates = 0;
  double r1 = 0.0, r2 = 0.0;  // perturbation rates (scenario "perturbed")
  std::string f = "constant";
  std::string omega = "uniform";
  std::string effects = "primary";
  int crossfit = 0;
  std::uint64_t seed = 1;
  long truth_paths = 200000;  // gm2 truth Monte Carlo budget
};

std::vector<PlanCell> parse_plan_json(const std::string& text);
std::vector<PlanCell> load_plan_json(const std::string& path);

struct CellMetrics {
  std::string generator, scenario;
  int n = 0;
  double r1 = 0.0, r2 = 0.0;
  std::string param;
  double bias = 0, rootn_abs_bias = 0, rmse = 0, ase_sd = 0;
  double coverage = 0, mc_se_coverage = 0;
  int replicates = 0, failed = 0;
};

std::string metrics_csv(const std::vector<CellMetrics>& rows);

std::vector<CellMetrics> run_experiment(const std::vector<PlanCell>& plan,
                                        int threads = 0);

// Build the estimand configuration a plan cell describes, for horizon T.
EstimandConfig cell_config(const PlanCell& cell, int T);

// True (alpha, beta) under the named generator and configuration. GM-1 is
// quadrature-exact; GM-2 is a seeded counterfactual Monte Carlo evaluation.
Eigen::VectorXd true_estimands(const std::string& generator,
                               const EstimandConfig& config,
                               long gm2_paths = 200000,
                               std::uint64_t gm2_seed = 424242);

// Working-model specification used by the gm1 "fitted" scenario.
NuisanceFitSpec gm1_fit_spec();
// Working models for gm2 table scenarios 1-4 (known treatment mechanism,
// eta and nu forced to zero).
NuisanceFitSpec gm2_scenario_spec(int scenario);

}  // namespace medexc
