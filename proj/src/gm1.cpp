#include "medexc/gm1.hpp"

#include <cmath>

#include "medexc/rng.hpp"

namespace medexc {

namespace {

// Beta(2,5) and Beta(5,2) densities; B(2,5) = B(5,2) = 1/30.
double g25(double u) {
  const double v = 1.0 - u;
  return 30.0 * u * v * v * v * v;
}
double g52(double u) { return 30.0 * u * u * u * u * (1.0 - u); }

// Gauss-Hermite rule via the Golub-Welsch eigen decomposition.
struct GaussHermite {
  Eigen::VectorXd nodes, weights;  // for integral of f(x) exp(-x^2)
  explicit GaussHermite(int n) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
      const double b = std::sqrt(k / 2.0);
      J(k, k - 1) = J(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    nodes = es.eigenvalues();
    weights.resize(n);
    const double sqrt_pi = std::sqrt(M_PI);
    for (int i = 0; i < n; ++i) {
      const double v0 = es.eigenvectors()(0, i);
      weights(i) = sqrt_pi * v0 * v0;
    }
  }
  // E f(X) for X ~ N(0, sigma^2)
  template <typename F>
  double gaussian_mean(double sigma, F f) const {
    double acc = 0.0;
    const double inv_sqrt_pi = 1.0 / std::sqrt(M_PI);
    for (int i = 0; i < nodes.size(); ++i)
      acc += weights(i) * inv_sqrt_pi * f(std::sqrt(2.0) * sigma * nodes(i));
    return acc;
  }
};

}  // namespace

double GM1Params::h1(int t, double x) const {
  return 0.5 * (g25(t / static_cast<double>(T)) + g25(expit(x)));
}

double GM1Params::h2(int t, double x) const {
  return 0.5 * (g52(t / static_cast<double>(T)) + g52(expit(x)));
}

void GM1Params::cells(int t, double x, double s[2][2]) const {
  const double e1 = kappa1 + h1(t, x);
  const double e2 = kappa2 + h2(t, x);
  s[0][0] = 1.0;
  s[1][0] = std::exp(e1);
  s[0][1] = std::exp(e2);
  s[1][1] = std::exp(kappa0 + e1 + e2);
}

double GM1Params::pi_treat(int t, double x) const {
  double s[2][2];
  cells(t, x, s);
  const double tot = s[0][0] + s[1][0] + s[0][1] + s[1][1];
  return (s[1][0] + s[1][1]) / tot;
}

double GM1Params::pm1(int a, int t, double x) const {
  return expit(kappa0 * a + kappa2 + h2(t, x));
}

Dataset gm1_generate(const GM1Params& par, int n, std::uint64_t seed) {
  Dataset ds;
  ds.T = par.T;
  ds.trajectories.resize(n);
  for (int i = 0; i < n; ++i) {
    Rng rng(seed, 1, static_cast<std::uint64_t>(i));
    Trajectory& tr = ds.trajectories[i];
    tr.id = std::to_string(i + 1);
    tr.x.resize(par.T, 1);
    tr.i.setOnes(par.T);
    tr.a.resize(par.T);
    tr.m.resize(par.T);
    double ymean = 0.0;
    for (int t = 1; t <= par.T; ++t) {
      const double x = rng.normal(0.0, par.sigma_x);
      tr.x(t - 1, 0) = x;
      double s[2][2];
      par.cells(t, x, s);
      const double tot = s[0][0] + s[1][0] + s[0][1] + s[1][1];
      // (A, M) multinomial draw, cells ordered (0,0),(1,0),(0,1),(1,1)
      const double u = rng.uniform() * tot;
      int a, m;
      if (u < s[0][0]) {
        a = 0; m = 0;
      } else if (u < s[0][0] + s[1][0]) {
        a = 1; m = 0;
      } else if (u < s[0][0] + s[1][0] + s[0][1]) {
        a = 0; m = 1;
      } else {
        a = 1; m = 1;
      }
      tr.a(t - 1) = a;
      tr.m(t - 1) = m;
      ymean += par.xi(t) * x + par.rho(t) * m + par.lambda(t) * a +
               par.tau(t) * a * m;
    }
    tr.y = rng.normal(ymean, par.sigma_y);
  }
  return ds;
}

GM1Moments gm1_moments(const GM1Params& par, int nodes) {
  GaussHermite gh(nodes);
  GM1Moments mom;
  mom.e_a.resize(par.T);
  mom.e_m.resize(par.T);
  mom.e_am.resize(par.T);
  mom.delta.resize(par.T);
  mom.e_pm.resize(par.T, 2);
  for (int t = 1; t <= par.T; ++t) {
    mom.e_a(t - 1) = gh.gaussian_mean(par.sigma_x, [&](double x) {
      return par.pi_treat(t, x);
    });
    mom.e_m(t - 1) = gh.gaussian_mean(par.sigma_x, [&](double x) {
      double s[2][2];
      par.cells(t, x, s);
      const double tot = s[0][0] + s[1][0] + s[0][1] + s[1][1];
      return (s[0][1] + s[1][1]) / tot;
    });
    mom.e_am(t - 1) = gh.gaussian_mean(par.sigma_x, [&](double x) {
      double s[2][2];
      par.cells(t, x, s);
      const double tot = s[0][0] + s[1][0] + s[0][1] + s[1][1];
      return s[1][1] / tot;
    });
    mom.delta(t - 1) = par.rho(t) * mom.e_m(t - 1) +
                       par.lambda(t) * mom.e_a(t - 1) +
                       par.tau(t) * mom.e_am(t - 1);
    for (int b = 0; b < 2; ++b)
      mom.e_pm(t - 1, b) = gh.gaussian_mean(par.sigma_x, [&](double x) {
        return par.pm1(b, t, x);
      });
  }
  return mom;
}

NuisanceSet gm1_true_nuisances(const GM1Params& par) {
  const GM1Moments mom = gm1_moments(par);

  // tail(s) = sum_{t > s} delta_t
  Eigen::VectorXd tail = Eigen::VectorXd::Zero(par.T + 1);
  for (int s = par.T - 1; s >= 1; --s)
    tail(s) = tail(s + 1) + mom.delta(s);  // delta(s) holds delta_{s+1}

  auto prefix = [par](const Trajectory& tr, int s) {
    double acc = 0.0;
    for (int t = 1; t < s; ++t)
      acc += par.xi(t) * tr.xval(t) + par.rho(t) * tr.med(t) +
             par.lambda(t) * tr.treat(t) +
             par.tau(t) * tr.treat(t) * tr.med(t);
    return acc;
  };

  NuisanceSet z;
  z.provenance = NuisanceSet::Provenance::ExactTruth;
  z.p = [par](const Trajectory& tr, int t, int a) {
    return excursion_propensity(par.pi_treat(t, tr.xval(t)), tr.elig(t), a);
  };
  z.q = [par](const Trajectory& tr, int t, double m, int a) {
    if (!tr.elig(t)) return 1.0;
    const double q1 = expit(par.kappa0 * m + par.kappa1 + par.h1(t, tr.xval(t)));
    return a == 1 ? q1 : 1.0 - q1;
  };
  z.mu = [par, tail, prefix](const Trajectory& tr, int s, double m, int a) {
    return prefix(tr, s) + par.xi(s) * tr.xval(s) + par.rho(s) * m +
           par.lambda(s) * a + par.tau(s) * a * m + tail(s);
  };
  z.eta = [par, tail, prefix](const Trajectory& tr, int s, int a) {
    return prefix(tr, s) + par.xi(s) * tr.xval(s) + par.lambda(s) * a +
           (par.rho(s) + par.tau(s) * a) * par.pm1(a, s, tr.xval(s)) + tail(s);
  };
  z.nu = [par, tail, prefix](const Trajectory& tr, int s, int a) {
    return prefix(tr, s) + par.xi(s) * tr.xval(s) + par.lambda(s) * a +
           (par.rho(s) + par.tau(s) * a) * par.pm1(1 - a, s, tr.xval(s)) +
           tail(s);
  };
  return z;
}

Eigen::MatrixXd gm1_true_theta(const GM1Params& par) {
  const GM1Moments mom = gm1_moments(par);
  const double delta_sum = mom.delta.sum();
  Eigen::MatrixXd theta(par.T, 4);
  // columns: (a,b) = 00, 10, 01, 11
  const int aa[4] = {0, 1, 0, 1};
  const int bb[4] = {0, 0, 1, 1};
  for (int t = 1; t <= par.T; ++t) {
    for (int c = 0; c < 4; ++c) {
      const int a = aa[c], b = bb[c];
      theta(t - 1, c) = delta_sum - mom.delta(t - 1) + par.lambda(t) * a +
                        (par.rho(t) + par.tau(t) * a) * mom.e_pm(t - 1, b);
    }
  }
  return theta;
}

Eigen::MatrixXd gm1_true_theta_mc(const GM1Params& par, long n_paths,
                                  std::uint64_t seed) {
  // X_t are independent, so the contribution of each time point can be
  // simulated in isolation; the excursion at t leaves other times' laws
  // unchanged. Common random numbers are shared across the (a, b) branches.
  Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(par.T, 4);
  Eigen::VectorXd natural = Eigen::VectorXd::Zero(par.T);
  const int aa[4] = {0, 1, 0, 1};
  const int bb[4] = {0, 0, 1, 1};
  for (long r = 0; r < n_paths; ++r) {
    Rng rng(seed, 2, static_cast<std::uint64_t>(r));
    for (int t = 1; t <= par.T; ++t) {
      const double x = rng.normal(0.0, par.sigma_x);
      const double u_joint = rng.uniform();
      const double u_m = rng.uniform();
      // natural contribution
      double s[2][2];
      par.cells(t, x, s);
      const double tot = s[0][0] + s[1][0] + s[0][1] + s[1][1];
      const double u = u_joint * tot;
      int an, mn;
      if (u < s[0][0]) {
        an = 0; mn = 0;
      } else if (u < s[0][0] + s[1][0]) {
        an = 1; mn = 0;
      } else if (u < s[0][0] + s[1][0] + s[0][1]) {
        an = 0; mn = 1;
      } else {
        an = 1; mn = 1;
      }
      natural(t - 1) += par.xi(t) * x + par.rho(t) * mn +
                        par.lambda(t) * an + par.tau(t) * an * mn;
      // excursion contribution at t, mediator drawn under arm b
      for (int c = 0; c < 4; ++c) {
        const int a = aa[c], b = bb[c];
        const int m = u_m < par.pm1(b, t, x) ? 1 : 0;
        theta(t - 1, c) += par.xi(t) * x + par.rho(t) * m +
                           par.lambda(t) * a + par.tau(t) * a * m;
      }
    }
  }
  theta /= static_cast<double>(n_paths);
  natural /= static_cast<double>(n_paths);
  const double nat_sum = natural.sum();
  for (int t = 0; t < par.T; ++t)
    theta.row(t).array() += nat_sum - natural(t);
  return theta;
}

}  // namespace medexc
