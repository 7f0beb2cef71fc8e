#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "medexc/dataset.hpp"
#include "medexc/estimator.hpp"
#include "medexc/nuisance.hpp"

namespace medexc {

// Finite-state sequential DGP, exactly enumerable. History dependence of the
// conditional tables is limited to (previous A, previous M, current X); the
// mediator's table depends on the current treatment as well, and on nothing
// later, so the cross-world substitution is well defined by construction.
// The distal outcome enters only through its conditional mean, tabulated on
// the full path.
struct DiscreteDGP {
  int T = 1;
  std::vector<double> xvals;  // support of X_t, size kx <= 4
  std::vector<double> mvals;  // support of M_t, size km <= 4

  // Flat tables, all indexed with prev_a, prev_m in {0..1} x {0..km-1}
  // (the state before t = 1 is fixed at prev_a = 0, prev_m = 0):
  //   px[((t-1)*2 + pa)*km + pm][ix]            P(X_t = xvals[ix] | .)
  //   pi[((t-1)*2 + pa)*km + pm][ix]            P(I_t = 1 | ., X_t)
  //   pa[((t-1)*2 + pa)*km + pm][ix]            P(A_t = 1 | I_t = 1, ., X_t)
  //   pm[(((t-1)*2 + pa)*km + pm)*kx + ix][a][im]  P(M_t = mvals[im] | ., A_t)
  std::vector<std::vector<double>> px, pi, pa;
  std::vector<std::array<std::vector<double>, 2>> pm;

  // E[Y | path], indexed by sum_t step_t * B^(t-1) where B = kx*2*2*km and
  // step_t = ((ix*2 + i)*2 + a)*km + im.
  std::vector<double> ymean;

  int kx() const { return static_cast<int>(xvals.size()); }
  int km() const { return static_cast<int>(mvals.size()); }
  int step_base() const { return kx() * 4 * km(); }
  long n_paths() const;

  void validate() const;  // throws on malformed tables
  std::string to_json() const;
  static DiscreteDGP from_json(const std::string& text);
};

// Uniformly random CPTs with positivity floor 0.05 on every probability.
DiscreteDGP random_dgp(std::uint64_t seed, int T = 0);

// theta_t^{ab} by three independent routes: the counterfactual definition,
// the iterated-expectation form, and the inverse-probability form.
double theta_definition(const DiscreteDGP& dgp, int t, int a, int b);
double theta_gformula(const DiscreteDGP& dgp, int t, int a, int b);
double theta_weighting(const DiscreteDGP& dgp, int t, int a, int b);

// Max pairwise disagreement among the three routes over all (t, a, b).
double max_route_disagreement(const DiscreteDGP& dgp);

// T x 4 table via the definition route; columns ordered 00, 10, 01, 11.
Eigen::MatrixXd oracle_theta_table(const DiscreteDGP& dgp);

// Exact projection of the oracle contrasts onto the estimand basis.
Eigen::VectorXd oracle_gamma(const DiscreteDGP& dgp,
                             const EstimandConfig& config);

// Exact nuisance functions derived from the tables (memoized enumeration).
NuisanceSet dgp_exact_nuisances(const DiscreteDGP& dgp);

Dataset dgp_sample(const DiscreteDGP& dgp, int n, std::uint64_t seed);

struct VerifyReport {
  Eigen::VectorXd gamma_true, gamma_hat, se;
  bool pass = false;  // every |gamma_hat - gamma_true| < 3 SE
  std::string to_json() const;
};

VerifyReport verify_estimator_on_dgp(const DiscreteDGP& dgp, int n,
                                     std::uint64_t seed,
                                     const EstimandConfig& config);

}  // namespace medexc
