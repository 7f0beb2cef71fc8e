#include "medexc/perturb.hpp"

#include <cmath>
#include <stdexcept>

#include "medexc/rng.hpp"

namespace medexc {

NuisanceSet perturb_nuisances(const NuisanceSet& truth,
                              const PerturbationSpec& spec,
                              std::uint64_t seed) {
  if (spec.n < 1) throw std::invalid_argument("perturb_nuisances: n < 1");
  if (spec.r1 <= 0 || spec.r2 <= 0)
    throw std::invalid_argument("perturb_nuisances: rates must be positive");

  Rng rng(seed, 3, 0);
  const double lo1 = 1.0 - std::pow(static_cast<double>(spec.n), -spec.r1);
  const double lo2 = 1.0 - std::pow(static_cast<double>(spec.n), -spec.r2);
  const double u_p = rng.uniform(lo1, 1.0);
  const double u_eta = rng.uniform(lo1, 1.0);
  const double u_nu = rng.uniform(lo1, 1.0);
  const double u_q = rng.uniform(lo2, 1.0);
  const double u_mu = rng.uniform(lo2, 1.0);

  NuisanceSet out;
  out.provenance = NuisanceSet::Provenance::Perturbed;
  out.p = [u_p, p = truth.p](const Trajectory& tr, int t, int a) {
    if (!tr.elig(t)) return 1.0;
    const double p1 = u_p * p(tr, t, 1);
    return a == 1 ? p1 : 1.0 - p1;
  };
  out.q = [u_q, q = truth.q](const Trajectory& tr, int t, double m, int a) {
    if (!tr.elig(t)) return 1.0;
    const double q1 = u_q * q(tr, t, m, 1);
    return a == 1 ? q1 : 1.0 - q1;
  };
  out.eta = [u_eta, eta = truth.eta](const Trajectory& tr, int t, int a) {
    return u_eta * eta(tr, t, a);
  };
  out.mu = [u_mu, mu = truth.mu](const Trajectory& tr, int t, double m, int a) {
    return u_mu * mu(tr, t, m, a);
  };
  out.nu = [u_nu, nu = truth.nu](const Trajectory& tr, int t, int a) {
    return u_nu * nu(tr, t, a);
  };
  return out;
}

}  // namespace medexc
