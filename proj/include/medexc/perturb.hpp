#pragma once

#include <cstdint>

#include "medexc/nuisance.hpp"

namespace medexc {

// Each nuisance function is scaled by its own multiplicative draw
// U ~ Uniform[1 - n^{-r}, 1], so the sup-norm error is O(n^{-r}). Rates are
// tied as r_p = r_eta = r_nu = r1 and r_q = r_mu = r2, matching the product
// structure of the remainder terms. Probability functions are perturbed on
// the a = 1 branch with the a = 0 branch set to the complement, and
// structural certainties at ineligible points are left untouched.
struct PerturbationSpec {
  double r1 = 0.5;
  double r2 = 0.5;
  long n = 0;  // sample size entering the rate
};

NuisanceSet perturb_nuisances(const NuisanceSet& truth,
                              const PerturbationSpec& spec,
                              std::uint64_t seed);

}  // namespace medexc
