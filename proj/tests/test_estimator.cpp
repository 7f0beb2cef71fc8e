#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "medexc/estimator.hpp"
#include "medexc/experiment.hpp"
#include "medexc/gm1.hpp"
#include "medexc/rng.hpp"

using namespace medexc;

namespace {

Trajectory make_point(int elig, int treat, double m, double y) {
  Trajectory tr;
  tr.id = "p";
  tr.x = Eigen::MatrixXd::Zero(1, 1);
  tr.i.resize(1);
  tr.i << elig;
  tr.a.resize(1);
  tr.a << treat;
  tr.m.resize(1);
  tr.m << m;
  tr.y = y;
  return tr;
}

NuisanceSet constant_nuisances(double pi, double q1, double eta, double mu,
                               double nu) {
  NuisanceSet z;
  z.p = [pi](const Trajectory& tr, int t, int a) {
    return excursion_propensity(pi, tr.elig(t), a);
  };
  z.q = [q1](const Trajectory& tr, int t, double, int a) {
    if (!tr.elig(t)) return 1.0;
    return a == 1 ? q1 : 1.0 - q1;
  };
  z.eta = [eta](const Trajectory&, int, int) { return eta; };
  z.mu = [mu](const Trajectory&, int, double, int) { return mu; };
  z.nu = [nu](const Trajectory&, int, int) { return nu; };
  return z;
}

}  // namespace

TEST_CASE("phi matches hand-computed values") {
  NuisanceSet z = constant_nuisances(0.4, 0.7, 2.0, 1.5, 1.2);

  // eligible, treated, Y = 3: indicator for arm 1 is 1, p(1) = 0.4
  Trajectory tr = make_point(1, 1, 1.0, 3.0);
  CHECK(phi_aa(tr, 1, 1, z) ==
        doctest::Approx(3.0 / 0.4 - (1.0 - 0.4) / 0.4 * 2.0));
  // arm 0: indicator 0, p(0) = 0.6
  CHECK(phi_aa(tr, 1, 0, z) ==
        doctest::Approx(-(0.0 - 0.6) / 0.6 * 2.0));

  // cross-world phi^{10}: ind_1 = 1, ind_0 = 0, p(0) = 0.6, q ratio 0.3/0.7
  const double expected10 = 1.0 * (0.3 / (0.6 * 0.7)) * (3.0 - 1.5) +
                            0.0 / 0.6 * (1.5 - 1.2) + 1.2;
  CHECK(phi_ab(tr, 1, 1, 0, z) == doctest::Approx(expected10));

  // untreated point flips the indicators
  Trajectory tr0 = make_point(1, 0, 1.0, 3.0);
  const double expected10_0 = 0.0 + 1.0 / 0.6 * (1.5 - 1.2) + 1.2;
  CHECK(phi_ab(tr0, 1, 1, 0, z) == doctest::Approx(expected10_0));
}

TEST_CASE("phi at ineligible points collapses to the outcome") {
  NuisanceSet z = constant_nuisances(0.4, 0.7, 2.0, 1.5, 1.2);
  Trajectory tr = make_point(0, 0, 0.5, 3.0);
  // both arm indicators are 1 and both propensities are 1
  CHECK(phi_aa(tr, 1, 1, z) == doctest::Approx(3.0));
  CHECK(phi_aa(tr, 1, 0, z) == doctest::Approx(3.0));
  // q(.|H,M) is structurally 1 for both arms, mu - nu terms cancel with nu
  CHECK(phi_ab(tr, 1, 1, 0, z) ==
        doctest::Approx(1.0 * (3.0 - 1.5) + (1.5 - 1.2) + 1.2));
}

TEST_CASE("psi is affine in gamma with slope -blockdiag(M, M)") {
  GM1Params par;
  Dataset ds = gm1_generate(par, 40, 3);
  NuisanceSet z = gm1_true_nuisances(par);
  EstimandConfig config;
  config.feature_map = FeatureMap::linear_in_t();
  config.weights = make_uniform_weights(par.T);

  const Eigen::MatrixXd M = projection_gram(config, par.T);
  const int p = config.feature_map.dim();
  Rng rng(19);
  for (int rep = 0; rep < 5; ++rep) {
    Eigen::VectorXd gamma(2 * p);
    for (int j = 0; j < 2 * p; ++j) gamma(j) = rng.normal();
    const Trajectory& tr = ds.trajectories[rep];

    // direct evaluation of psi(gamma) from its definition
    Eigen::VectorXd direct = Eigen::VectorXd::Zero(2 * p);
    for (int t = 1; t <= par.T; ++t) {
      const double w = config.weights.w(t - 1);
      const Eigen::VectorXd f = config.feature_map.evaluate(t);
      const double c1 = phi_ab(tr, t, 1, 0, z) - phi_aa(tr, t, 0, z);
      const double c2 = phi_aa(tr, t, 1, z) - phi_ab(tr, t, 1, 0, z);
      direct.head(p) += w * (c1 - f.dot(gamma.head(p))) * f;
      direct.tail(p) += w * (c2 - f.dot(gamma.tail(p))) * f;
    }

    // affine representation used by the solver
    Eigen::VectorXd affine = psi_contribution(tr, z, config);
    affine.head(p) -= M * gamma.head(p);
    affine.tail(p) -= M * gamma.tail(p);

    CHECK((direct - affine).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("estimating equation is solved to machine precision") {
  GM1Params par;
  Dataset ds = gm1_generate(par, 300, 8);
  NuisanceSet z = gm1_true_nuisances(par);
  for (auto fm : {FeatureMap::constant(), FeatureMap::linear_in_t()}) {
    EstimandConfig config;
    config.feature_map = fm;
    config.weights = make_uniform_weights(par.T);
    EstimateResult res = estimate_with_nuisances(ds, z, config);
    CHECK(res.diag.solver_residual < 1e-10);
  }
}

TEST_CASE("direct plus indirect equals total exactly") {
  GM1Params par;
  Dataset ds = gm1_generate(par, 200, 4);
  NuisanceSet z = gm1_true_nuisances(par);
  EstimandConfig config;
  config.weights = make_uniform_weights(par.T);

  config.pair = EstimandConfig::EffectPair::Primary;
  EstimateResult prim = estimate_with_nuisances(ds, z, config);
  config.pair = EstimandConfig::EffectPair::Swapped;
  EstimateResult swap = estimate_with_nuisances(ds, z, config);
  config.pair = EstimandConfig::EffectPair::TotalOnly;
  EstimateResult total = estimate_with_nuisances(ds, z, config);

  // the cross-world phi cancels within each pair, so both decompositions
  // reproduce the same total effect estimate
  CHECK(prim.gamma(0) + prim.gamma(1) ==
        doctest::Approx(total.gamma(0)).epsilon(1e-12));
  CHECK(swap.gamma(0) + swap.gamma(1) ==
        doctest::Approx(total.gamma(0)).epsilon(1e-12));

  for (const auto& pt : prim.curves)
    CHECK(pt.ndee + pt.niee == doctest::Approx(pt.total).epsilon(1e-12));
}

TEST_CASE("effect curves are the projection of gamma") {
  GM1Params par;
  Dataset ds = gm1_generate(par, 150, 21);
  NuisanceSet z = gm1_true_nuisances(par);
  EstimandConfig config;
  config.feature_map = FeatureMap::linear_in_t();
  config.weights = make_uniform_weights(par.T);
  EstimateResult res = estimate_with_nuisances(ds, z, config);
  const int p = 2;
  for (const auto& pt : res.curves) {
    const Eigen::VectorXd f = config.feature_map.evaluate(pt.t);
    CHECK(pt.ndee == doctest::Approx(f.dot(res.gamma.head(p))));
    CHECK(pt.niee == doctest::Approx(f.dot(res.gamma.tail(p))));
  }
}

TEST_CASE("confidence intervals widen with the level") {
  GM1Params par;
  Dataset ds = gm1_generate(par, 150, 2);
  NuisanceSet z = gm1_true_nuisances(par);
  EstimandConfig config;
  config.weights = make_uniform_weights(par.T);
  EstimateResult a = estimate_with_nuisances(ds, z, config);
  config.level = 0.99;
  EstimateResult b = estimate_with_nuisances(ds, z, config);
  CHECK(b.ci(0, 1) - b.ci(0, 0) > a.ci(0, 1) - a.ci(0, 0));
  // 95% z-multiplier
  CHECK((a.ci(0, 1) - a.gamma(0)) / a.se(0) ==
        doctest::Approx(1.959964).epsilon(1e-5));
}

TEST_CASE("cross-fitting is deterministic in the seed") {
  GM1Params par;
  Dataset ds = gm1_generate(par, 400, 6);
  EstimandConfig config;
  config.weights = make_uniform_weights(par.T);
  config.folds = 2;
  const NuisanceFitSpec spec = gm1_fit_spec();
  EstimateResult a = estimate_crossfit(ds, spec, config, 17);
  EstimateResult b = estimate_crossfit(ds, spec, config, 17);
  EstimateResult c = estimate_crossfit(ds, spec, config, 18);
  CHECK(a.gamma == b.gamma);
  CHECK(a.cov == b.cov);
  CHECK(a.gamma != c.gamma);
  CHECK(a.diag.fold_sizes == std::vector<int>{200, 200});
}

TEST_CASE("fold sizes differ by at most one") {
  GM1Params par;
  Dataset ds = gm1_generate(par, 103, 9);
  EstimandConfig config;
  config.weights = make_uniform_weights(par.T);
  config.folds = 4;
  EstimateResult res = estimate_crossfit(ds, gm1_fit_spec(), config, 5);
  int lo = 1000, hi = 0, sum = 0;
  for (int s : res.diag.fold_sizes) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
    sum += s;
  }
  CHECK(sum == 103);
  CHECK(hi - lo <= 1);
}

TEST_CASE("config validation") {
  GM1Params par;
  Dataset ds = gm1_generate(par, 20, 1);
  NuisanceSet z = gm1_true_nuisances(par);
  EstimandConfig config;
  config.weights = make_uniform_weights(par.T + 1);  // wrong length
  CHECK_THROWS(estimate_with_nuisances(ds, z, config));
  config.weights = make_uniform_weights(par.T);
  config.folds = 1;
  CHECK_THROWS(estimate_with_nuisances(ds, z, config));
  config.folds = 0;
  config.level = 1.5;
  CHECK_THROWS(estimate_with_nuisances(ds, z, config));
}

TEST_CASE("degenerate projection basis is rejected") {
  EstimandConfig config;
  config.feature_map = FeatureMap::polynomial(6);  // 7 dims on 5 points
  config.weights = make_uniform_weights(5);
  CHECK_THROWS_WITH_AS(projection_gram(config, 5), "degenerate projection basis",
                       std::runtime_error);
}

TEST_CASE("theta projection helper matches hand computation") {
  Eigen::MatrixXd theta(2, 4);
  // columns 00, 10, 01, 11
  theta << 0.0, 1.0, 0.5, 1.5,
           0.0, 2.0, 1.0, 3.0;
  EstimandConfig config;
  config.weights = make_uniform_weights(2);
  Eigen::VectorXd gamma = project_contrasts(theta, config);
  CHECK(gamma(0) == doctest::Approx(1.5));   // mean of theta10 - theta00
  CHECK(gamma(1) == doctest::Approx(0.75));  // mean of theta11 - theta10

  config.pair = EstimandConfig::EffectPair::TotalOnly;
  Eigen::VectorXd tot = project_contrasts(theta, config);
  CHECK(tot(0) == doctest::Approx(2.25));
}
