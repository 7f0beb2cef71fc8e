#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "medexc/dataset.hpp"

namespace medexc {

// 1(A_t = d_t^a): the a=1 excursion assigns A = I, the a=0 excursion A = 0.
inline int arm_indicator(int elig, int treat, int arm) {
  return arm == 1 ? (treat == elig ? 1 : 0) : (treat == 0 ? 1 : 0);
}

// P(A_t = d_t^a | H_t) composed from the eligible-arm probability pi.
// Ineligible points have A = 0 with certainty, and both excursions assign 0,
// so both arm probabilities are structurally 1.
inline double excursion_propensity(double pi, int elig, int arm) {
  if (arm == 1) return elig ? pi : 1.0;
  return 1.0 - elig * pi;
}

double clip_probability(double v, double clip,
                        std::atomic<long>* counter = nullptr);

struct BasisSpec {
  enum class Kind { None, Linear, Poly, BSpline };
  Kind kind = Kind::None;
  int param = 0;  // poly degree or bspline df

  static BasisSpec none() { return {}; }
  static BasisSpec linear() { return {Kind::Linear, 0}; }
  static BasisSpec poly(int deg) { return {Kind::Poly, deg}; }
  static BasisSpec bspline(int df) { return {Kind::BSpline, df}; }
  // "none" | "linear" | "poly:<deg>" | "bspline:<df>"
  static BasisSpec parse(const std::string& text);
  std::string describe() const;
};

// Deterministic feature construction from (trajectory, t). Pooling over t is
// done by including a basis in t as regressors in one regression over all
// rows. Spline knots for continuous variables are frozen from the fitting
// sample, so the map stays fixed at evaluation time.
struct HistoryFeatureSpec {
  BasisSpec time_basis = BasisSpec::none();
  BasisSpec x_basis = BasisSpec::linear();       // each covariate column
  bool lag_a = false;                            // include A_{t-1}
  BasisSpec lag_m_basis = BasisSpec::none();     // basis in M_{t-1}
  BasisSpec mediator_basis = BasisSpec::linear();  // basis in M_t (q, mu)
  bool interact_time_x = false;                  // tensor time x covariates
  double ridge = 1e-4;
  double clip = 0.01;
};

class FeatureBuilder {
 public:
  FeatureBuilder(const Dataset& ds, const HistoryFeatureSpec& spec);

  int history_dim() const { return hist_dim_; }
  int full_dim() const { return hist_dim_ + med_dim_; }

  Eigen::VectorXd history(const Trajectory& tr, int t) const;
  // history block followed by the mediator basis evaluated at m
  Eigen::VectorXd with_mediator(const Trajectory& tr, int t, double m) const;
  void append_mediator(double m, Eigen::VectorXd* out) const;

 private:
  HistoryFeatureSpec spec_;
  int T_;
  int hist_dim_, med_dim_;
  std::optional<BSplineBasis> time_bs_, lag_m_bs_, med_bs_;
  std::vector<BSplineBasis> x_bs_;  // one per covariate column when splined
  int time_dim_, lag_dim_, x_block_dim_, inter_dim_;

  int basis_dim(const BasisSpec& b) const;
  void eval_basis(const BasisSpec& b, const std::optional<BSplineBasis>& bs,
                  double v, double* out) const;
};

// The five nuisance functions, evaluable at any (trajectory, t, arm).
// Probability outputs obey p(1)+p(0)=1 and q(1)+q(0)=1 at eligible points;
// ineligible points return the structural certainty 1 for both arms.
struct NuisanceSet {
  enum class Provenance { Fitted, KnownPropensity, ExactTruth, Perturbed };

  std::function<double(const Trajectory&, int, int)> p;            // (tr,t,a)
  std::function<double(const Trajectory&, int, double, int)> q;    // (tr,t,m,a)
  std::function<double(const Trajectory&, int, int)> eta;          // (tr,t,a)
  std::function<double(const Trajectory&, int, double, int)> mu;   // (tr,t,m,a)
  std::function<double(const Trajectory&, int, int)> nu;           // (tr,t,a)
  Provenance provenance = Provenance::Fitted;
  std::shared_ptr<std::atomic<long>> clip_events =
      std::make_shared<std::atomic<long>>(0);
};

using PropensityFn = std::function<double(const Trajectory&, int)>;

struct NuisanceFitSpec {
  HistoryFeatureSpec base;
  // per-model overrides; unset means use base
  std::optional<HistoryFeatureSpec> q_spec, mu_spec, eta_spec, nu_spec;
  bool eta_zero = false;  // force eta-hat to 0
  bool nu_zero = false;   // force nu-hat to 0
  PropensityFn known_propensity;  // replaces p-hat when set
};

// Pooled working-model fits for (p, q, eta, mu, nu) on the given sample.
// p and q are fit on eligible rows only; mu and eta are fit per arm stratum
// 1(A_t = d_t^a) = 1; nu regresses the mu pseudo-outcome on history among
// rows with 1(A_t = d_t^{1-a}) = 1.
NuisanceSet fit_nuisance_set(const Dataset& ds, const NuisanceFitSpec& spec);

}  // namespace medexc
