#include "medexc/estimator.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "medexc/rng.hpp"

namespace medexc {

double phi_aa(const Trajectory& tr, int t, int a, const NuisanceSet& z) {
  const int ind = arm_indicator(tr.elig(t), tr.treat(t), a);
  const double pa = z.p(tr, t, a);
  const double eta = z.eta(tr, t, a);
  return ind / pa * tr.y - (ind - pa) / pa * eta;
}

double phi_ab(const Trajectory& tr, int t, int a, int b, const NuisanceSet& z,
              long* extreme_ratio_counter) {
  const int ind_a = arm_indicator(tr.elig(t), tr.treat(t), a);
  const int ind_b = arm_indicator(tr.elig(t), tr.treat(t), b);
  const double m = tr.med(t);
  const double pb = z.p(tr, t, b);
  const double qa = z.q(tr, t, m, a);
  const double qb = z.q(tr, t, m, b);
  const double mu_a = z.mu(tr, t, m, a);
  const double nu_a = z.nu(tr, t, a);
  if (extreme_ratio_counter && qb / qa > 100.0) ++*extreme_ratio_counter;
  return ind_a * qb / (pb * qa) * (tr.y - mu_a) +
         ind_b / pb * (mu_a - nu_a) + nu_a;
}

Eigen::VectorXd psi_contribution(const Trajectory& tr, const NuisanceSet& z,
                                 const EstimandConfig& config,
                                 long* extreme_ratio_counter) {
  const int p = config.feature_map.dim();
  const int nb = config.blocks();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(nb * p);
  for (int t = 1; t <= config.weights.T(); ++t) {
    const double w = config.weights.w(t - 1);
    if (w == 0.0) continue;
    const Eigen::VectorXd f = config.feature_map.evaluate(t);
    double c1 = 0.0, c2 = 0.0;
    switch (config.pair) {
      case EstimandConfig::EffectPair::Primary: {
        const double p00 = phi_aa(tr, t, 0, z);
        const double p11 = phi_aa(tr, t, 1, z);
        const double p10 = phi_ab(tr, t, 1, 0, z, extreme_ratio_counter);
        c1 = p10 - p00;
        c2 = p11 - p10;
        break;
      }
      case EstimandConfig::EffectPair::Swapped: {
        const double p00 = phi_aa(tr, t, 0, z);
        const double p11 = phi_aa(tr, t, 1, z);
        const double p01 = phi_ab(tr, t, 0, 1, z, extreme_ratio_counter);
        c1 = p11 - p01;
        c2 = p01 - p00;
        break;
      }
      case EstimandConfig::EffectPair::TotalOnly: {
        c1 = phi_aa(tr, t, 1, z) - phi_aa(tr, t, 0, z);
        break;
      }
    }
    out.head(p) += w * c1 * f;
    if (nb == 2) out.tail(p) += w * c2 * f;
  }
  return out;
}

Eigen::MatrixXd projection_gram(const EstimandConfig& config, int T) {
  const int p = config.feature_map.dim();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(p, p);
  for (int t = 1; t <= T; ++t) {
    const Eigen::VectorXd f = config.feature_map.evaluate(t);
    M += config.weights.w(t - 1) * f * f.transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  const double smin = svd.singularValues().minCoeff();
  const double smax = svd.singularValues().maxCoeff();
  if (!(smin > 1e-12 * std::max(smax, 1.0)))
    throw std::runtime_error("degenerate projection basis");
  return M;
}

namespace {

struct CoreFit {
  Eigen::VectorXd gamma;
  Eigen::MatrixXd cov;
  Eigen::MatrixXd M;
  double solver_residual = 0.0;
  long extreme_ratios = 0;
};

// Solves the affine estimating equation given per-fold nuisances.
// folds[i] indexes the nuisance set used for participant i.
CoreFit solve_core(const Dataset& ds, const std::vector<const NuisanceSet*>& z_of,
                   const EstimandConfig& config) {
  const int p = config.feature_map.dim();
  const int nb = config.blocks();
  const int dim = nb * p;
  const int n = ds.n();

  Eigen::MatrixXd M = projection_gram(config, ds.T);

  CoreFit fit;
  fit.M = M;
  Eigen::MatrixXd U(dim, n);
  for (int i = 0; i < n; ++i)
    U.col(i) = psi_contribution(ds.trajectories[i], *z_of[i], config,
                                &fit.extreme_ratios);

  // psi_i(gamma) = U_i - B gamma with B = blockdiag(M,...,M), so the solve
  // is linear: gamma-hat = B^{-1} mean(U).
  Eigen::LDLT<Eigen::MatrixXd> Mldlt(M);
  const Eigen::VectorXd ubar = U.rowwise().mean();
  fit.gamma.resize(dim);
  for (int blk = 0; blk < nb; ++blk)
    fit.gamma.segment(blk * p, p) = Mldlt.solve(ubar.segment(blk * p, p));

  // sandwich: bread = -B (data-free), meat = P_n psi psi^T at gamma-hat
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd bg(dim);
  for (int blk = 0; blk < nb; ++blk)
    bg.segment(blk * p, p) = M * fit.gamma.segment(blk * p, p);
  Eigen::VectorXd residual_sum = Eigen::VectorXd::Zero(dim);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd psi_i = U.col(i) - bg;
    residual_sum += psi_i;
    meat += psi_i * psi_i.transpose();
  }
  meat /= n;
  fit.solver_residual = (residual_sum / n).cwiseAbs().maxCoeff();

  Eigen::MatrixXd binv_meat(dim, dim);
  for (int blk = 0; blk < nb; ++blk)
    binv_meat.middleRows(blk * p, p) = Mldlt.solve(meat.middleRows(blk * p, p));
  Eigen::MatrixXd cov(dim, dim);
  for (int blk = 0; blk < nb; ++blk)
    cov.middleCols(blk * p, p) =
        Mldlt.solve(binv_meat.middleCols(blk * p, p).transpose()).transpose();
  cov /= n;
  fit.cov = 0.5 * (cov + cov.transpose());
  return fit;
}

double normal_quantile(double p) {
  // Acklam's rational approximation, refined by one Halley step
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double u = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
        ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
  } else if (p <= 1.0 - plow) {
    const double u = p - 0.5, r = u * u;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        u /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double u = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
        ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double uu = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  return x - uu / (1.0 + x * uu / 2.0);
}

EstimateResult assemble(const Dataset& ds, const CoreFit& fit,
                        const EstimandConfig& config) {
  const int p = config.feature_map.dim();
  const int nb = config.blocks();
  EstimateResult res;
  res.gamma = fit.gamma;
  res.cov = fit.cov;
  const int dim = nb * p;
  res.se.resize(dim);
  res.ci.resize(dim, 2);
  const double zq = normal_quantile(1.0 - (1.0 - config.level) / 2.0);
  for (int j = 0; j < dim; ++j) {
    res.se(j) = std::sqrt(std::max(0.0, fit.cov(j, j)));
    res.ci(j, 0) = fit.gamma(j) - zq * res.se(j);
    res.ci(j, 1) = fit.gamma(j) + zq * res.se(j);
  }

  for (int t = 1; t <= ds.T; ++t) {
    const Eigen::VectorXd f = config.feature_map.evaluate(t);
    EffectCurvePoint pt;
    pt.t = t;
    if (nb == 2) {
      const Eigen::VectorXd alpha = fit.gamma.head(p);
      const Eigen::VectorXd beta = fit.gamma.tail(p);
      pt.ndee = f.dot(alpha);
      pt.niee = f.dot(beta);
      pt.ndee_se = std::sqrt(
          std::max(0.0, (f.transpose() * fit.cov.topLeftCorner(p, p) * f)(0)));
      pt.niee_se = std::sqrt(std::max(
          0.0, (f.transpose() * fit.cov.bottomRightCorner(p, p) * f)(0)));
      pt.total = pt.ndee + pt.niee;
      Eigen::VectorXd ff(2 * p);
      ff << f, f;
      pt.total_se =
          std::sqrt(std::max(0.0, (ff.transpose() * fit.cov * ff)(0)));
    } else {
      pt.total = f.dot(fit.gamma);
      pt.total_se =
          std::sqrt(std::max(0.0, (f.transpose() * fit.cov * f)(0)));
    }
    res.curves.push_back(pt);
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(fit.M);
  res.diag.projection_condition =
      svd.singularValues().maxCoeff() / svd.singularValues().minCoeff();
  res.diag.solver_residual = fit.solver_residual;
  res.diag.extreme_weight_ratios = fit.extreme_ratios;

  res.f_desc = config.feature_map.describe();
  res.omega = config.weights.w;
  res.pair_desc = config.pair == EstimandConfig::EffectPair::Primary
                      ? "primary"
                      : (config.pair == EstimandConfig::EffectPair::Swapped
                             ? "swapped"
                             : "total");
  res.folds = config.folds;
  res.level = config.level;
  return res;
}

void check_config(const Dataset& ds, const EstimandConfig& config) {
  if (config.weights.T() != ds.T)
    throw std::invalid_argument("weight vector length must equal T");
  if (!(config.level > 0.0 && config.level < 1.0))
    throw std::invalid_argument("confidence level must be in (0,1)");
  if (config.folds == 1 || config.folds < 0)
    throw std::invalid_argument("folds must be 0 or >= 2");
}

}  // namespace

EstimateResult estimate_with_nuisances(const Dataset& ds, const NuisanceSet& z,
                                       const EstimandConfig& config) {
  check_config(ds, config);
  std::vector<const NuisanceSet*> z_of(ds.n(), &z);
  CoreFit fit = solve_core(ds, z_of, config);
  EstimateResult res = assemble(ds, fit, config);
  res.diag.clip_events = z.clip_events->load();
  return res;
}

EstimateResult estimate(const Dataset& ds, const NuisanceFitSpec& nuspec,
                        const EstimandConfig& config) {
  NuisanceSet z = fit_nuisance_set(ds, nuspec);
  return estimate_with_nuisances(ds, z, config);
}

EstimateResult estimate_crossfit(const Dataset& ds,
                                 const NuisanceFitSpec& nuspec,
                                 const EstimandConfig& config,
                                 std::uint64_t seed) {
  check_config(ds, config);
  const int K = config.folds;
  if (K < 2) throw std::invalid_argument("cross-fitting requires folds >= 2");
  const int n = ds.n();
  if (n < 2 * K) throw std::invalid_argument("need n >= 2K for cross-fitting");

  // seeded Fisher-Yates; first n mod K folds take the extra participant
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed, 0xf01d5);
  for (int i = n - 1; i > 0; --i)
    std::swap(perm[i], perm[static_cast<int>(rng.below(i + 1))]);
  std::vector<int> fold_of(n);
  std::vector<std::vector<int>> folds(K);
  {
    const int base = n / K, extra = n % K;
    int pos = 0;
    for (int k = 0; k < K; ++k) {
      const int size_k = base + (k < extra ? 1 : 0);
      for (int j = 0; j < size_k; ++j) {
        fold_of[perm[pos]] = k;
        folds[k].push_back(perm[pos]);
        ++pos;
      }
    }
  }

  std::vector<NuisanceSet> zk;
  zk.reserve(K);
  for (int k = 0; k < K; ++k) {
    Dataset train;
    train.T = ds.T;
    for (int i = 0; i < n; ++i)
      if (fold_of[i] != k) train.trajectories.push_back(ds.trajectories[i]);
    zk.push_back(fit_nuisance_set(train, nuspec));
  }

  const int p = config.feature_map.dim();
  const int nb = config.blocks();
  const int dim = nb * p;
  Eigen::MatrixXd M = projection_gram(config, ds.T);
  Eigen::LDLT<Eigen::MatrixXd> Mldlt(M);

  long extreme = 0;
  Eigen::MatrixXd U(dim, n);
  for (int i = 0; i < n; ++i)
    U.col(i) =
        psi_contribution(ds.trajectories[i], zk[fold_of[i]], config, &extreme);

  // K^{-1} sum_k P_{n,k} psi(gamma) = 0, affine with the same slope -B
  Eigen::VectorXd ubar = Eigen::VectorXd::Zero(dim);
  for (int k = 0; k < K; ++k) {
    Eigen::VectorXd fold_mean = Eigen::VectorXd::Zero(dim);
    for (int i : folds[k]) fold_mean += U.col(i);
    ubar += fold_mean / static_cast<double>(folds[k].size());
  }
  ubar /= K;

  CoreFit fit;
  fit.M = M;
  fit.extreme_ratios = extreme;
  fit.gamma.resize(dim);
  for (int blk = 0; blk < nb; ++blk)
    fit.gamma.segment(blk * p, p) = Mldlt.solve(ubar.segment(blk * p, p));

  Eigen::VectorXd bg(dim);
  for (int blk = 0; blk < nb; ++blk)
    bg.segment(blk * p, p) = M * fit.gamma.segment(blk * p, p);

  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd residual = Eigen::VectorXd::Zero(dim);
  for (int k = 0; k < K; ++k) {
    Eigen::MatrixXd meat_k = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd res_k = Eigen::VectorXd::Zero(dim);
    for (int i : folds[k]) {
      const Eigen::VectorXd psi_i = U.col(i) - bg;
      meat_k += psi_i * psi_i.transpose();
      res_k += psi_i;
    }
    meat += meat_k / static_cast<double>(folds[k].size());
    residual += res_k / static_cast<double>(folds[k].size());
  }
  meat /= K;
  fit.solver_residual = (residual / K).cwiseAbs().maxCoeff();

  Eigen::MatrixXd binv_meat(dim, dim);
  for (int blk = 0; blk < nb; ++blk)
    binv_meat.middleRows(blk * p, p) = Mldlt.solve(meat.middleRows(blk * p, p));
  Eigen::MatrixXd cov(dim, dim);
  for (int blk = 0; blk < nb; ++blk)
    cov.middleCols(blk * p, p) =
        Mldlt.solve(binv_meat.middleCols(blk * p, p).transpose()).transpose();
  cov /= n;
  fit.cov = 0.5 * (cov + cov.transpose());

  EstimateResult res = assemble(ds, fit, config);
  for (int k = 0; k < K; ++k)
    res.diag.fold_sizes.push_back(static_cast<int>(folds[k].size()));
  long clips = 0;
  for (const auto& z : zk) clips += z.clip_events->load();
  res.diag.clip_events = clips;
  res.seed = seed;
  return res;
}

Eigen::VectorXd project_contrasts(const Eigen::MatrixXd& theta,
                                  const EstimandConfig& config) {
  const int T = static_cast<int>(theta.rows());
  const Eigen::MatrixXd M = projection_gram(config, T);
  const int p = static_cast<int>(M.rows());
  const int nb = config.blocks();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nb * p);
  for (int t = 1; t <= T; ++t) {
    const Eigen::VectorXd f = config.feature_map.evaluate(t);
    const double w = config.weights.w(t - 1);
    double c1 = 0.0, c2 = 0.0;
    switch (config.pair) {
      case EstimandConfig::EffectPair::Primary:
        c1 = theta(t - 1, 1) - theta(t - 1, 0);  // 10 - 00
        c2 = theta(t - 1, 3) - theta(t - 1, 1);  // 11 - 10
        break;
      case EstimandConfig::EffectPair::Swapped:
        c1 = theta(t - 1, 3) - theta(t - 1, 2);  // 11 - 01
        c2 = theta(t - 1, 2) - theta(t - 1, 0);  // 01 - 00
        break;
      case EstimandConfig::EffectPair::TotalOnly:
        c1 = theta(t - 1, 3) - theta(t - 1, 0);  // 11 - 00
        break;
    }
    rhs.head(p) += w * c1 * f;
    if (nb == 2) rhs.tail(p) += w * c2 * f;
  }
  Eigen::LDLT<Eigen::MatrixXd> Mldlt(M);
  Eigen::VectorXd gamma(nb * p);
  for (int blk = 0; blk < nb; ++blk)
    gamma.segment(blk * p, p) = Mldlt.solve(rhs.segment(blk * p, p));
  return gamma;
}

std::string EstimateResult::to_json() const {
  std::ostringstream os;
  os.precision(12);
  auto vec = [&](const Eigen::VectorXd& v) {
    os << '[';
    for (int i = 0; i < v.size(); ++i) os << (i ? "," : "") << v(i);
    os << ']';
  };
  os << "{\"gamma_hat\":";
  vec(gamma);
  os << ",\"cov\":[";
  for (int i = 0; i < cov.rows(); ++i) {
    os << (i ? "," : "");
    vec(cov.row(i));
  }
  os << "],\"se\":";
  vec(se);
  os << ",\"ci\":[";
  for (int i = 0; i < ci.rows(); ++i) {
    os << (i ? "," : "") << '[' << ci(i, 0) << ',' << ci(i, 1) << ']';
  }
  os << "],\"effect_curves\":[";
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto& c = curves[i];
    os << (i ? "," : "") << "{\"t\":" << c.t << ",\"ndee\":" << c.ndee
       << ",\"ndee_se\":" << c.ndee_se << ",\"niee\":" << c.niee
       << ",\"niee_se\":" << c.niee_se << ",\"total\":" << c.total
       << ",\"total_se\":" << c.total_se << '}';
  }
  os << "],\"diagnostics\":{\"clip_events\":" << diag.clip_events
     << ",\"extreme_weight_ratios\":" << diag.extreme_weight_ratios
     << ",\"fold_sizes\":[";
  for (std::size_t i = 0; i < diag.fold_sizes.size(); ++i)
    os << (i ? "," : "") << diag.fold_sizes[i];
  os << "],\"projection_condition\":" << diag.projection_condition
     << ",\"solver_residual\":" << diag.solver_residual
     << "},\"config_echo\":{\"f\":\"" << f_desc << "\",\"omega\":";
  vec(omega);
  os << ",\"effects\":\"" << pair_desc << "\",\"folds\":" << folds
     << ",\"level\":" << level << ",\"seed\":" << seed << "}}";
  return os.str();
}

}  // namespace medexc
