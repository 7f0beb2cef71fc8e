#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "medexc/dataset.hpp"
#include "medexc/nuisance.hpp"

namespace medexc {

// Sequential binary-(A,M) generative model with independent Gaussian
// covariates, T = 5, and a linear distal-outcome mean.
struct GM1Params {
  int T = 5;
  double sigma_x = 2.0;
  double sigma_y = 2.0;
  double kappa0 = 2.0;
  double kappa1 = -1.5;
  double kappa2 = -1.5;

  double coef(int t) const { return 0.5 + 0.25 * (t - 1); }
  double xi(int t) const { return coef(t); }
  double rho(int t) const { return coef(t); }
  double lambda(int t) const { return coef(t); }
  double tau(int t) const { return coef(t); }

  double h1(int t, double x) const;
  double h2(int t, double x) const;

  // joint cell weights s_am at (t, x)
  void cells(int t, double x, double s[2][2]) const;
  double pi_treat(int t, double x) const;     // P(A=1 | X_t = x)
  double pm1(int a, int t, double x) const;   // P(M=1 | A=a, X_t = x)
};

Dataset gm1_generate(const GM1Params& par, int n, std::uint64_t seed);

// Per-t marginals E(A_t), E(M_t), E(A_t M_t), the delta tail terms, and the
// cross-arm mediator means, all by Gauss-Hermite quadrature over X.
struct GM1Moments {
  Eigen::VectorXd e_a, e_m, e_am, delta;  // length T
  Eigen::MatrixXd e_pm;                   // T x 2: E_X expit(k0*b + k2 + h2)
};
GM1Moments gm1_moments(const GM1Params& par, int nodes = 50);

// Exact nuisance functions (closed forms plus quadrature tails).
NuisanceSet gm1_true_nuisances(const GM1Params& par);

// T x 4 table of theta_t^{ab}; columns ordered 00, 10, 01, 11.
Eigen::MatrixXd gm1_true_theta(const GM1Params& par);

// Independent definition-level route: counterfactual simulation.
Eigen::MatrixXd gm1_true_theta_mc(const GM1Params& par, long n_paths,
                                  std::uint64_t seed);

}  // namespace medexc
