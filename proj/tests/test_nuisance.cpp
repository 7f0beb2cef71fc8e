#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "medexc/gm1.hpp"
#include "medexc/gm2.hpp"
#include "medexc/nuisance.hpp"
#include "medexc/experiment.hpp"
#include "medexc/perturb.hpp"
#include "medexc/rng.hpp"

using namespace medexc;

TEST_CASE("arm indicator truth table") {
  // eligible: d^1 assigns 1, d^0 assigns 0
  CHECK(arm_indicator(1, 1, 1) == 1);
  CHECK(arm_indicator(1, 0, 1) == 0);
  CHECK(arm_indicator(1, 1, 0) == 0);
  CHECK(arm_indicator(1, 0, 0) == 1);
  // ineligible: both policies assign 0, A = 0 matches both
  CHECK(arm_indicator(0, 0, 1) == 1);
  CHECK(arm_indicator(0, 0, 0) == 1);
}

TEST_CASE("excursion propensity composes eligibility") {
  CHECK(excursion_propensity(0.3, 1, 1) == doctest::Approx(0.3));
  CHECK(excursion_propensity(0.3, 1, 0) == doctest::Approx(0.7));
  CHECK(excursion_propensity(0.3, 0, 1) == 1.0);
  CHECK(excursion_propensity(0.3, 0, 0) == 1.0);
  // complementarity at eligible points
  for (double pi : {0.01, 0.4, 0.99})
    CHECK(excursion_propensity(pi, 1, 1) + excursion_propensity(pi, 1, 0) ==
          doctest::Approx(1.0));
}

TEST_CASE("probability clipping") {
  std::atomic<long> count{0};
  CHECK(clip_probability(0.5, 0.01, &count) == 0.5);
  CHECK(count.load() == 0);
  CHECK(clip_probability(0.001, 0.01, &count) == 0.01);
  CHECK(clip_probability(0.9999, 0.01, &count) == 0.99);
  CHECK(count.load() == 2);
}

TEST_CASE("basis spec parsing") {
  CHECK(BasisSpec::parse("none").kind == BasisSpec::Kind::None);
  CHECK(BasisSpec::parse("linear").kind == BasisSpec::Kind::Linear);
  CHECK(BasisSpec::parse("poly:3").param == 3);
  CHECK(BasisSpec::parse("bspline:6").param == 6);
  CHECK_THROWS(BasisSpec::parse("wavelet"));
}

TEST_CASE("gm1 exact nuisances satisfy their integral identities") {
  GM1Params par;
  NuisanceSet z = gm1_true_nuisances(par);
  Dataset ds = gm1_generate(par, 20, 31);
  for (int i = 0; i < 5; ++i) {
    const Trajectory& tr = ds.trajectories[i];
    for (int t = 1; t <= par.T; ++t) {
      // q complementarity
      for (double m : {0.0, 1.0})
        CHECK(z.q(tr, t, m, 1) + z.q(tr, t, m, 0) == doctest::Approx(1.0));
      // p complementarity
      CHECK(z.p(tr, t, 1) + z.p(tr, t, 0) == doctest::Approx(1.0));
      for (int a = 0; a <= 1; ++a) {
        // eta integrates mu against the same-arm mediator law
        const double pm = par.pm1(a, t, tr.xval(t));
        const double eta_id =
            pm * z.mu(tr, t, 1.0, a) + (1.0 - pm) * z.mu(tr, t, 0.0, a);
        CHECK(z.eta(tr, t, a) == doctest::Approx(eta_id).epsilon(1e-10));
        // nu integrates mu against the opposite-arm mediator law
        const double pm_o = par.pm1(1 - a, t, tr.xval(t));
        const double nu_id =
            pm_o * z.mu(tr, t, 1.0, a) + (1.0 - pm_o) * z.mu(tr, t, 0.0, a);
        CHECK(z.nu(tr, t, a) == doctest::Approx(nu_id).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("gm1 quadrature moments match simulation") {
  GM1Params par;
  GM1Moments mom = gm1_moments(par);
  const int n = 200000;
  Dataset ds = gm1_generate(par, n, 77);
  for (int t = 1; t <= par.T; ++t) {
    double ea = 0, em = 0, eam = 0;
    for (const auto& tr : ds.trajectories) {
      ea += tr.treat(t);
      em += tr.med(t);
      eam += tr.treat(t) * tr.med(t);
    }
    ea /= n;
    em /= n;
    eam /= n;
    CHECK(mom.e_a(t - 1) == doctest::Approx(ea).epsilon(0.01));
    CHECK(mom.e_m(t - 1) == doctest::Approx(em).epsilon(0.01));
    CHECK(mom.e_am(t - 1) == doctest::Approx(eam).epsilon(0.02));
  }
}

TEST_CASE("fitted working models approximate the gm1 truths") {
  GM1Params par;
  Dataset ds = gm1_generate(par, 4000, 13);
  NuisanceSet truth = gm1_true_nuisances(par);
  NuisanceSet fit = fit_nuisance_set(ds, gm1_fit_spec());
  double perr = 0, qerr = 0, muerr = 0;
  int cnt = 0;
  for (int i = 0; i < 200; ++i) {
    const Trajectory& tr = ds.trajectories[i];
    for (int t = 1; t <= par.T; ++t) {
      perr += std::abs(fit.p(tr, t, 1) - truth.p(tr, t, 1));
      qerr += std::abs(fit.q(tr, t, tr.med(t), 1) -
                       truth.q(tr, t, tr.med(t), 1));
      muerr += std::abs(fit.mu(tr, t, tr.med(t), 1) -
                        truth.mu(tr, t, tr.med(t), 1));
      ++cnt;
    }
  }
  CHECK(perr / cnt < 0.03);
  CHECK(qerr / cnt < 0.03);
  // mu omits past-time terms, which add independent variation around the
  // correct current-state component; the average error stays bounded
  CHECK(muerr / cnt < 3.0);
}

TEST_CASE("nuisance fitting reports degenerate strata") {
  Dataset tiny;
  tiny.T = 2;
  CHECK_THROWS(fit_nuisance_set(tiny, NuisanceFitSpec{}));
}

TEST_CASE("perturbation scales stay in the stated interval") {
  GM1Params par;
  NuisanceSet truth = gm1_true_nuisances(par);
  Dataset ds = gm1_generate(par, 10, 5);
  const Trajectory& tr = ds.trajectories[0];

  PerturbationSpec spec{0.5, 0.5, 10000};
  const double lo = 1.0 - std::pow(10000.0, -0.5);  // 0.99
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL}) {
    NuisanceSet z = perturb_nuisances(truth, spec, seed);
    for (int t = 1; t <= par.T; ++t) {
      const double ratio = z.p(tr, t, 1) / truth.p(tr, t, 1);
      CHECK(ratio >= lo);
      CHECK(ratio <= 1.0);
      CHECK(z.p(tr, t, 1) + z.p(tr, t, 0) == doctest::Approx(1.0));
      const double qr = z.q(tr, t, 1.0, 1) / truth.q(tr, t, 1.0, 1);
      CHECK(qr >= lo);
      CHECK(qr <= 1.0);
      const double mur = z.mu(tr, t, 1.0, 1) / truth.mu(tr, t, 1.0, 1);
      CHECK(mur >= lo);
      CHECK(mur <= 1.0);
    }
  }
}

TEST_CASE("perturbation leaves structural certainties untouched") {
  GM2Params par;
  Dataset ds = gm2_generate(par, 50, 21);
  // exactness is not needed here; any base functions expose the invariant
  NuisanceSet base;
  base.p = [&par](const Trajectory& tr, int t, int a) {
    const double prev_a = t > 1 ? tr.treat(t - 1) : 0.0;
    const double prev_m = t > 1 ? tr.med(t - 1) : 0.0;
    return excursion_propensity(par.pi_treat(t, prev_a, prev_m, tr.xval(t)),
                                tr.elig(t), a);
  };
  base.q = [](const Trajectory& tr, int t, double, int) {
    return tr.elig(t) ? 0.5 : 1.0;
  };
  base.eta = [](const Trajectory&, int, int) { return 1.0; };
  base.mu = [](const Trajectory&, int, double, int) { return 1.0; };
  base.nu = [](const Trajectory&, int, int) { return 1.0; };

  NuisanceSet z = perturb_nuisances(base, PerturbationSpec{0.3, 0.3, 100}, 9);
  bool found = false;
  for (const auto& tr : ds.trajectories)
    for (int t = 1; t <= par.T; ++t)
      if (!tr.elig(t)) {
        CHECK(z.p(tr, t, 1) == 1.0);
        CHECK(z.p(tr, t, 0) == 1.0);
        CHECK(z.q(tr, t, 0.0, 1) == 1.0);
        found = true;
      }
  CHECK(found);
}

TEST_CASE("perturbation vanishes as the rate grows") {
  GM1Params par;
  NuisanceSet truth = gm1_true_nuisances(par);
  Dataset ds = gm1_generate(par, 5, 5);
  const Trajectory& tr = ds.trajectories[0];
  NuisanceSet z = perturb_nuisances(truth, PerturbationSpec{30.0, 30.0, 10000}, 3);
  CHECK(z.p(tr, 2, 1) == doctest::Approx(truth.p(tr, 2, 1)).epsilon(1e-10));
  CHECK(z.mu(tr, 2, 1.0, 1) ==
        doctest::Approx(truth.mu(tr, 2, 1.0, 1)).epsilon(1e-10));
}

TEST_CASE("perturbation rate law across sample sizes") {
  GM1Params par;
  NuisanceSet truth = gm1_true_nuisances(par);
  Dataset ds = gm1_generate(par, 5, 8);
  const Trajectory& tr = ds.trajectories[0];
  for (long n : {100L, 1000L, 10000L}) {
    NuisanceSet z = perturb_nuisances(truth, PerturbationSpec{0.4, 0.4, n}, 17);
    const double bound = std::pow(static_cast<double>(n), -0.4);
    const double rel =
        std::abs(z.p(tr, 1, 1) - truth.p(tr, 1, 1)) / truth.p(tr, 1, 1);
    CHECK(rel <= bound + 1e-12);
  }
}
