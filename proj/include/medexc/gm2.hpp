#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "medexc/dataset.hpp"
#include "medexc/nuisance.hpp"

namespace medexc {

// Serially dependent generative model with non-trivial eligibility, T = 30,
// Gaussian covariate and mediator, binary eligibility and treatment.
struct GM2Params {
  int T = 30;

  double h3(int t, double z) const;
  // P(A_t = 1 | eligible, A_{t-1}, M_{t-1}, X_t)
  double pi_treat(int t, double prev_a, double prev_m, double x) const;
  // per-time-point contribution to the outcome mean
  double y_term(int t, double x, double m, double a) const;
};

Dataset gm2_generate(const GM2Params& par, int n, std::uint64_t seed);

// The treatment mechanism, readable off the stored trajectory.
PropensityFn gm2_known_propensity(const GM2Params& par);

// T x 4 table of theta_t^{ab}; columns ordered 00, 10, 01, 11. Counterfactual
// simulation with common random numbers across the four arm pairs.
Eigen::MatrixXd gm2_true_theta_mc(const GM2Params& par, long n_paths,
                                  std::uint64_t seed, int threads = 0);

// Threads resolved from the MEDEXC_THREADS environment variable when the
// requested count is 0, falling back to the hardware count.
int resolve_threads(int requested);

}  // namespace medexc
