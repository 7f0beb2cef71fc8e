#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "medexc/dataset.hpp"
#include "medexc/nuisance.hpp"

namespace medexc {

struct EstimandConfig {
  enum class EffectPair {
    Primary,   // rows: NDEE' = theta10-theta00, NIEE = theta11-theta10
    Swapped,   // rows: NDEE  = theta11-theta01, NIEE' = theta01-theta00
    TotalOnly  // single block: theta11-theta00
  };

  FeatureMap feature_map = FeatureMap::constant();
  WeightVector weights;
  EffectPair pair = EffectPair::Primary;
  int folds = 0;  // 0 = no cross-fitting, otherwise >= 2
  double level = 0.95;

  int blocks() const { return pair == EffectPair::TotalOnly ? 1 : 2; }
};

double phi_aa(const Trajectory& tr, int t, int a, const NuisanceSet& z);
double phi_ab(const Trajectory& tr, int t, int a, int b, const NuisanceSet& z,
              long* extreme_ratio_counter = nullptr);

// The gamma-free part of the estimating function for one participant:
// sum_t omega(t) [c1(t) f(t); c2(t) f(t)] with the contrasts chosen by the
// effect pair. psi(gamma) = psi_contribution - blockdiag(M,..,M) gamma.
Eigen::VectorXd psi_contribution(const Trajectory& tr, const NuisanceSet& z,
                                 const EstimandConfig& config,
                                 long* extreme_ratio_counter = nullptr);

struct EffectCurvePoint {
  int t = 0;
  double ndee = 0, ndee_se = 0;
  double niee = 0, niee_se = 0;
  double total = 0, total_se = 0;
};

struct EstimateResult {
  Eigen::VectorXd gamma;  // alpha block then beta block (or single block)
  Eigen::MatrixXd cov;    // V-hat / n
  Eigen::VectorXd se;
  Eigen::MatrixXd ci;     // k x 2
  std::vector<EffectCurvePoint> curves;

  struct Diagnostics {
    long clip_events = 0;
    long extreme_weight_ratios = 0;  // cross-world ratio above 100
    std::vector<int> fold_sizes;
    double projection_condition = 0.0;  // cond(M)
    double solver_residual = 0.0;       // ||P_n psi(gamma-hat)||_inf
  } diag;

  std::string f_desc, pair_desc;
  Eigen::VectorXd omega;
  int folds = 0;
  double level = 0.95;
  std::uint64_t seed = 0;

  std::string to_json() const;
};

// M = sum_t omega(t) f(t) f(t)^T; throws on a degenerate projection basis.
Eigen::MatrixXd projection_gram(const EstimandConfig& config, int T);

// Exact projection of a T x 4 theta table (columns 00, 10, 01, 11) onto the
// estimand basis; returns the gamma vector the estimator targets.
Eigen::VectorXd project_contrasts(const Eigen::MatrixXd& theta,
                                  const EstimandConfig& config);

// Closed-form solve of P_n psi(gamma; zeta) = 0 with the given nuisances.
EstimateResult estimate_with_nuisances(const Dataset& ds, const NuisanceSet& z,
                                       const EstimandConfig& config);

// Two-stage estimator: nuisances fit on the full sample, then solve.
EstimateResult estimate(const Dataset& ds, const NuisanceFitSpec& nuspec,
                        const EstimandConfig& config);

// K-fold cross-fitted variant; fold assignment is a seeded shuffle.
EstimateResult estimate_crossfit(const Dataset& ds,
                                 const NuisanceFitSpec& nuspec,
                                 const EstimandConfig& config,
                                 std::uint64_t seed);

}  // namespace medexc
