#include "medexc/oracle.hpp"

#include <cmath>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"
#include "medexc/rng.hpp"

namespace medexc {

namespace {

int prev_rows(const DiscreteDGP& d) { return d.T * 2 * d.km(); }

int prev_idx(const DiscreteDGP& d, int t, int pa, int pmi) {
  return ((t - 1) * 2 + pa) * d.km() + pmi;
}
int pm_row(const DiscreteDGP& d, int t, int pa, int pmi, int ix) {
  return prev_idx(d, t, pa, pmi) * d.kx() + ix;
}
long step_code(const DiscreteDGP& d, int ix, int i, int a, int im) {
  return (static_cast<long>(ix) * 2 + i) * 2 * d.km() + a * d.km() + im;
}

int value_index(const std::vector<double>& vals, double v, const char* what) {
  for (std::size_t k = 0; k < vals.size(); ++k)
    if (std::abs(vals[k] - v) < 1e-9) return static_cast<int>(k);
  throw std::runtime_error(std::string("value not in ") + what + " support: " +
                           std::to_string(v));
}

// E[ymean | path fixed through t, state (a_t, m_t)]; natural law onward.
double future_mean(const DiscreteDGP& d, int t, int pa, int pmi, long code,
                   long mult) {
  if (t >= d.T) return d.ymean[code];
  const int s = t + 1;
  double acc = 0.0;
  const int pidx = prev_idx(d, s, pa, pmi);
  for (int ix = 0; ix < d.kx(); ++ix) {
    const double wx = d.px[pidx][ix];
    if (wx == 0.0) continue;
    for (int i = 0; i <= 1; ++i) {
      const double wi = i ? d.pi[pidx][ix] : 1.0 - d.pi[pidx][ix];
      if (wi == 0.0) continue;
      const int amax = i ? 1 : 0;
      for (int a = 0; a <= amax; ++a) {
        const double wa =
            i ? (a ? d.pa[pidx][ix] : 1.0 - d.pa[pidx][ix]) : 1.0;
        if (wa == 0.0) continue;
        const int mrow = pm_row(d, s, pa, pmi, ix);
        for (int im = 0; im < d.km(); ++im) {
          const double wm = d.pm[mrow][a][im];
          if (wm == 0.0) continue;
          acc += wx * wi * wa * wm *
                 future_mean(d, s, a, im,
                             code + step_code(d, ix, i, a, im) * mult,
                             mult * d.step_base());
        }
      }
    }
  }
  return acc;
}

struct DefCtx {
  const DiscreteDGP& d;
  int t_int, a, b;
  double acc = 0.0;
};

void rec_definition(DefCtx& c, int t, int pa, int pmi, long code, long mult,
                    double prob) {
  const DiscreteDGP& d = c.d;
  if (t > d.T) {
    c.acc += prob * d.ymean[code];
    return;
  }
  const int pidx = prev_idx(d, t, pa, pmi);
  for (int ix = 0; ix < d.kx(); ++ix) {
    const double wx = d.px[pidx][ix];
    if (wx == 0.0) continue;
    for (int i = 0; i <= 1; ++i) {
      const double wi = i ? d.pi[pidx][ix] : 1.0 - d.pi[pidx][ix];
      if (wi == 0.0) continue;
      const int mrow = pm_row(d, t, pa, pmi, ix);
      if (t == c.t_int) {
        const int a_set = i * c.a;       // excursion d^a
        const int a_med = i * c.b;       // mediator drawn under d^b
        for (int im = 0; im < d.km(); ++im) {
          const double wm = d.pm[mrow][a_med][im];
          if (wm == 0.0) continue;
          rec_definition(c, t + 1, a_set, im,
                         code + step_code(d, ix, i, a_set, im) * mult,
                         mult * d.step_base(), prob * wx * wi * wm);
        }
      } else {
        const int amax = i ? 1 : 0;
        for (int a = 0; a <= amax; ++a) {
          const double wa =
              i ? (a ? d.pa[pidx][ix] : 1.0 - d.pa[pidx][ix]) : 1.0;
          if (wa == 0.0) continue;
          for (int im = 0; im < d.km(); ++im) {
            const double wm = d.pm[mrow][a][im];
            if (wm == 0.0) continue;
            rec_definition(c, t + 1, a, im,
                           code + step_code(d, ix, i, a, im) * mult,
                           mult * d.step_base(), prob * wx * wi * wa * wm);
          }
        }
      }
    }
  }
}

struct GformCtx {
  const DiscreteDGP& d;
  int t_int, a, b;
  double acc = 0.0;
};

void rec_gformula(GformCtx& c, int t, int pa, int pmi, long code, long mult,
                  double prob) {
  const DiscreteDGP& d = c.d;
  const int pidx = prev_idx(d, t, pa, pmi);
  for (int ix = 0; ix < d.kx(); ++ix) {
    const double wx = d.px[pidx][ix];
    if (wx == 0.0) continue;
    for (int i = 0; i <= 1; ++i) {
      const double wi = i ? d.pi[pidx][ix] : 1.0 - d.pi[pidx][ix];
      if (wi == 0.0) continue;
      if (t < c.t_int) {
        const int amax = i ? 1 : 0;
        for (int a = 0; a <= amax; ++a) {
          const double wa =
              i ? (a ? d.pa[pidx][ix] : 1.0 - d.pa[pidx][ix]) : 1.0;
          if (wa == 0.0) continue;
          const int mrow = pm_row(d, t, pa, pmi, ix);
          for (int im = 0; im < d.km(); ++im) {
            const double wm = d.pm[mrow][a][im];
            if (wm == 0.0) continue;
            rec_gformula(c, t + 1, a, im,
                         code + step_code(d, ix, i, a, im) * mult,
                         mult * d.step_base(), prob * wx * wi * wa * wm);
          }
        }
        continue;
      }
      // at t = t_int: condition on A_t = d^a, mediator law under d^b
      const int a_set = i * c.a;
      const int a_med = i * c.b;
      if (i) {
        const double p_a = c.a ? d.pa[pidx][ix] : 1.0 - d.pa[pidx][ix];
        const double p_b = c.b ? d.pa[pidx][ix] : 1.0 - d.pa[pidx][ix];
        if (p_a == 0.0 || p_b == 0.0)
          throw std::runtime_error(
              "theta_gformula: zero-probability conditioning event A_t = d^a "
              "at t = " + std::to_string(t));
      }
      const int mrow = pm_row(d, t, pa, pmi, ix);
      double inner = 0.0;
      for (int im = 0; im < d.km(); ++im) {
        const double wm_b = d.pm[mrow][a_med][im];
        if (wm_b == 0.0) continue;
        if (d.pm[mrow][a_set][im] == 0.0)
          throw std::runtime_error(
              "theta_gformula: zero-probability conditioning event (A_t = "
              "d^a, M_t = m) at t = " + std::to_string(t));
        inner += wm_b * future_mean(d, t, a_set, im,
                                    code + step_code(d, ix, i, a_set, im) * mult,
                                    mult * d.step_base());
      }
      c.acc += prob * wx * wi * inner;
    }
  }
}

struct WeightCtx {
  const DiscreteDGP& d;
  int t_int, a, b;
  double acc = 0.0;
};

void rec_weighting(WeightCtx& c, int t, int pa, int pmi, long code, long mult,
                   double prob, double weight) {
  const DiscreteDGP& d = c.d;
  if (t > d.T) {
    c.acc += prob * weight * d.ymean[code];
    return;
  }
  const int pidx = prev_idx(d, t, pa, pmi);
  for (int ix = 0; ix < d.kx(); ++ix) {
    const double wx = d.px[pidx][ix];
    if (wx == 0.0) continue;
    for (int i = 0; i <= 1; ++i) {
      const double wi = i ? d.pi[pidx][ix] : 1.0 - d.pi[pidx][ix];
      if (wi == 0.0) continue;
      const int mrow = pm_row(d, t, pa, pmi, ix);
      const int amax = i ? 1 : 0;
      for (int a = 0; a <= amax; ++a) {
        const double wa =
            i ? (a ? d.pa[pidx][ix] : 1.0 - d.pa[pidx][ix]) : 1.0;
        if (wa == 0.0) continue;
        for (int im = 0; im < d.km(); ++im) {
          const double wm = d.pm[mrow][a][im];
          if (wm == 0.0) continue;
          double w = weight;
          if (t == c.t_int) {
            const double pi_a = i ? d.pa[pidx][ix] : 0.0;
            const double p1 = excursion_propensity(pi_a, i, 1);
            const double p0 = excursion_propensity(pi_a, i, 0);
            const int ind_a = arm_indicator(i, a, c.a);
            if (!ind_a) continue;
            if (c.a == c.b) {
              const double p_a = c.a ? p1 : p0;
              if (p_a == 0.0)
                throw std::runtime_error(
                    "theta_weighting: zero propensity at t = " +
                    std::to_string(t));
              w *= 1.0 / p_a;
            } else {
              // structural certainty at ineligible points: both q are 1
              double q_a = 1.0, q_b = 1.0;
              if (i) {
                const double num1 = p1 * d.pm[mrow][1][im];
                const double num0 = p0 * d.pm[mrow][0][im];
                if (num1 + num0 == 0.0)
                  throw std::runtime_error(
                      "theta_weighting: zero mediator density at t = " +
                      std::to_string(t));
                const double q1 = num1 / (num1 + num0);
                q_a = c.a ? q1 : 1.0 - q1;
                q_b = c.b ? q1 : 1.0 - q1;
              }
              const double p_b = c.b ? p1 : p0;
              if (p_b == 0.0 || q_a == 0.0)
                throw std::runtime_error(
                    "theta_weighting: zero weight denominator at t = " +
                    std::to_string(t));
              w *= q_b / (p_b * q_a);
            }
          }
          rec_weighting(c, t + 1, a, im,
                        code + step_code(d, ix, i, a, im) * mult,
                        mult * d.step_base(), prob * wx * wi * wa * wm, w);
        }
      }
    }
  }
}

void check_prob_row(const std::vector<double>& row, double* sum) {
  *sum = 0.0;
  for (double v : row) {
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument("DiscreteDGP: probability outside [0,1]");
    *sum += v;
  }
}

}  // namespace

long DiscreteDGP::n_paths() const {
  long n = 1;
  for (int t = 0; t < T; ++t) n *= step_base();
  return n;
}

void DiscreteDGP::validate() const {
  if (T < 1 || T > 3) throw std::invalid_argument("DiscreteDGP: T must be 1..3");
  if (kx() < 1 || kx() > 4 || km() < 1 || km() > 4)
    throw std::invalid_argument("DiscreteDGP: support sizes must be 1..4");
  const int rows = prev_rows(*this);
  if (static_cast<int>(px.size()) != rows || static_cast<int>(pi.size()) != rows ||
      static_cast<int>(pa.size()) != rows)
    throw std::invalid_argument("DiscreteDGP: wrong table row count");
  if (static_cast<int>(pm.size()) != rows * kx())
    throw std::invalid_argument("DiscreteDGP: wrong mediator table row count");
  double s;
  for (const auto& row : px) {
    if (static_cast<int>(row.size()) != kx())
      throw std::invalid_argument("DiscreteDGP: px row size");
    check_prob_row(row, &s);
    if (std::abs(s - 1.0) > 1e-12)
      throw std::invalid_argument("DiscreteDGP: px row does not sum to 1");
  }
  for (const auto& row : pi) {
    if (static_cast<int>(row.size()) != kx())
      throw std::invalid_argument("DiscreteDGP: pi row size");
    check_prob_row(row, &s);
  }
  for (const auto& row : pa) {
    if (static_cast<int>(row.size()) != kx())
      throw std::invalid_argument("DiscreteDGP: pa row size");
    check_prob_row(row, &s);
  }
  for (const auto& arm : pm)
    for (const auto& row : arm) {
      if (static_cast<int>(row.size()) != km())
        throw std::invalid_argument("DiscreteDGP: pm row size");
      check_prob_row(row, &s);
      if (std::abs(s - 1.0) > 1e-12)
        throw std::invalid_argument("DiscreteDGP: pm row does not sum to 1");
    }
  if (static_cast<long>(ymean.size()) != n_paths())
    throw std::invalid_argument("DiscreteDGP: ymean size mismatch");
  for (std::size_t k = 0; k < xvals.size(); ++k)
    for (std::size_t j = k + 1; j < xvals.size(); ++j)
      if (std::abs(xvals[k] - xvals[j]) < 1e-9)
        throw std::invalid_argument("DiscreteDGP: duplicate x support values");
  for (std::size_t k = 0; k < mvals.size(); ++k)
    for (std::size_t j = k + 1; j < mvals.size(); ++j)
      if (std::abs(mvals[k] - mvals[j]) < 1e-9)
        throw std::invalid_argument("DiscreteDGP: duplicate m support values");
}

std::string DiscreteDGP::to_json() const {
  nlohmann::json j;
  j["T"] = T;
  j["xvals"] = xvals;
  j["mvals"] = mvals;
  j["px"] = px;
  j["pi"] = pi;
  j["pa"] = pa;
  nlohmann::json jm = nlohmann::json::array();
  for (const auto& arm : pm) jm.push_back({arm[0], arm[1]});
  j["pm"] = jm;
  j["ymean"] = ymean;
  return j.dump(2);
}

DiscreteDGP DiscreteDGP::from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  DiscreteDGP d;
  d.T = j.at("T").get<int>();
  d.xvals = j.at("xvals").get<std::vector<double>>();
  d.mvals = j.at("mvals").get<std::vector<double>>();
  d.px = j.at("px").get<std::vector<std::vector<double>>>();
  d.pi = j.at("pi").get<std::vector<std::vector<double>>>();
  d.pa = j.at("pa").get<std::vector<std::vector<double>>>();
  for (const auto& jr : j.at("pm")) {
    std::array<std::vector<double>, 2> arm;
    arm[0] = jr.at(0).get<std::vector<double>>();
    arm[1] = jr.at(1).get<std::vector<double>>();
    d.pm.push_back(std::move(arm));
  }
  d.ymean = j.at("ymean").get<std::vector<double>>();
  d.validate();
  return d;
}

DiscreteDGP random_dgp(std::uint64_t seed, int T) {
  Rng rng(seed, 4, 0);
  DiscreteDGP d;
  d.T = T > 0 ? T : 1 + static_cast<int>(rng.below(3));
  d.xvals = {-1.0, 1.0};
  d.mvals = {0.0, 1.0};
  const double floor = 0.05;
  auto prob = [&] { return rng.uniform(floor, 1.0 - floor); };
  auto prob_row = [&](int k) {
    // normalized positive vector, then mixed toward uniform for the floor
    std::vector<double> w(k);
    double s = 0.0;
    for (double& v : w) {
      v = -std::log(rng.uniform(1e-12, 1.0));
      s += v;
    }
    const double mix = 1.0 - k * floor;
    for (double& v : w) v = floor + mix * v / s;
    return w;
  };
  const int rows = prev_rows(d);
  d.px.resize(rows);
  d.pi.resize(rows);
  d.pa.resize(rows);
  d.pm.resize(rows * d.kx());
  for (int r = 0; r < rows; ++r) {
    d.px[r] = prob_row(d.kx());
    d.pi[r].resize(d.kx());
    d.pa[r].resize(d.kx());
    for (int ix = 0; ix < d.kx(); ++ix) {
      d.pi[r][ix] = prob();
      d.pa[r][ix] = prob();
    }
  }
  for (auto& arm : d.pm)
    for (int a = 0; a <= 1; ++a) arm[a] = prob_row(d.km());
  d.ymean.resize(d.n_paths());
  for (double& y : d.ymean) y = rng.uniform(-2.0, 2.0);
  d.validate();
  return d;
}

double theta_definition(const DiscreteDGP& dgp, int t, int a, int b) {
  DefCtx c{dgp, t, a, b};
  rec_definition(c, 1, 0, 0, 0, 1, 1.0);
  return c.acc;
}

double theta_gformula(const DiscreteDGP& dgp, int t, int a, int b) {
  GformCtx c{dgp, t, a, b};
  rec_gformula(c, 1, 0, 0, 0, 1, 1.0);
  return c.acc;
}

double theta_weighting(const DiscreteDGP& dgp, int t, int a, int b) {
  WeightCtx c{dgp, t, a, b};
  rec_weighting(c, 1, 0, 0, 0, 1, 1.0, 1.0);
  return c.acc;
}

double max_route_disagreement(const DiscreteDGP& dgp) {
  double worst = 0.0;
  for (int t = 1; t <= dgp.T; ++t)
    for (int a = 0; a <= 1; ++a)
      for (int b = 0; b <= 1; ++b) {
        const double v1 = theta_definition(dgp, t, a, b);
        const double v2 = theta_gformula(dgp, t, a, b);
        const double v3 = theta_weighting(dgp, t, a, b);
        worst = std::max({worst, std::abs(v1 - v2), std::abs(v2 - v3),
                          std::abs(v1 - v3)});
      }
  return worst;
}

Eigen::MatrixXd oracle_theta_table(const DiscreteDGP& dgp) {
  Eigen::MatrixXd theta(dgp.T, 4);
  const int aa[4] = {0, 1, 0, 1};
  const int bb[4] = {0, 0, 1, 1};
  for (int t = 1; t <= dgp.T; ++t)
    for (int c = 0; c < 4; ++c)
      theta(t - 1, c) = theta_definition(dgp, t, aa[c], bb[c]);
  return theta;
}

Eigen::VectorXd oracle_gamma(const DiscreteDGP& dgp,
                             const EstimandConfig& config) {
  return project_contrasts(oracle_theta_table(dgp), config);
}

NuisanceSet dgp_exact_nuisances(const DiscreteDGP& dgp) {
  auto d = std::make_shared<DiscreteDGP>(dgp);
  auto memo = std::make_shared<std::unordered_map<long, double>>();

  // realized (prev_a, prev_m index) entering time t, plus the path code prefix
  struct Prefix {
    int pa, pmi;
    long code, mult;
  };
  auto prefix_of = [d](const Trajectory& tr, int t) {
    Prefix pre{0, 0, 0, 1};
    for (int s = 1; s < t; ++s) {
      const int ix = value_index(d->xvals, tr.xval(s), "X");
      const int im = value_index(d->mvals, tr.med(s), "M");
      pre.code += step_code(*d, ix, tr.elig(s), tr.treat(s), im) * pre.mult;
      pre.mult *= d->step_base();
      pre.pa = tr.treat(s);
      pre.pmi = im;
    }
    return pre;
  };

  auto mu_fn = [d, memo, prefix_of](const Trajectory& tr, int t, double m,
                                    int a) {
    const Prefix pre = prefix_of(tr, t);
    const int ix = value_index(d->xvals, tr.xval(t), "X");
    const int im = value_index(d->mvals, m, "M");
    const int i = tr.elig(t);
    const int a_set = i * a;  // excursion d^a
    const long code = pre.code + step_code(*d, ix, i, a_set, im) * pre.mult;
    const long key = code * 4 + t;  // codes at fixed t are distinct
    auto it = memo->find(key);
    if (it != memo->end()) return it->second;
    const double v =
        future_mean(*d, t, a_set, im, code, pre.mult * d->step_base());
    (*memo)[key] = v;
    return v;
  };

  NuisanceSet z;
  z.provenance = NuisanceSet::Provenance::ExactTruth;
  z.p = [d, prefix_of](const Trajectory& tr, int t, int a) {
    const Prefix pre = prefix_of(tr, t);
    const int ix = value_index(d->xvals, tr.xval(t), "X");
    const double pi1 = d->pa[prev_idx(*d, t, pre.pa, pre.pmi)][ix];
    return excursion_propensity(pi1, tr.elig(t), a);
  };
  z.q = [d, prefix_of](const Trajectory& tr, int t, double m, int a) {
    if (!tr.elig(t)) return 1.0;
    const Prefix pre = prefix_of(tr, t);
    const int ix = value_index(d->xvals, tr.xval(t), "X");
    const int im = value_index(d->mvals, m, "M");
    const double pi1 = d->pa[prev_idx(*d, t, pre.pa, pre.pmi)][ix];
    const int mrow = pm_row(*d, t, pre.pa, pre.pmi, ix);
    const double num1 = pi1 * d->pm[mrow][1][im];
    const double num0 = (1.0 - pi1) * d->pm[mrow][0][im];
    const double q1 = num1 / (num1 + num0);
    return a == 1 ? q1 : 1.0 - q1;
  };
  z.mu = mu_fn;
  z.eta = [d, prefix_of, mu_fn](const Trajectory& tr, int t, int a) {
    const Prefix pre = prefix_of(tr, t);
    const int ix = value_index(d->xvals, tr.xval(t), "X");
    const int mrow = pm_row(*d, t, pre.pa, pre.pmi, ix);
    const int a_med = tr.elig(t) * a;
    double acc = 0.0;
    for (int im = 0; im < d->km(); ++im)
      acc += d->pm[mrow][a_med][im] * mu_fn(tr, t, d->mvals[im], a);
    return acc;
  };
  z.nu = [d, prefix_of, mu_fn](const Trajectory& tr, int t, int a) {
    const Prefix pre = prefix_of(tr, t);
    const int ix = value_index(d->xvals, tr.xval(t), "X");
    const int mrow = pm_row(*d, t, pre.pa, pre.pmi, ix);
    const int a_med = tr.elig(t) * (1 - a);
    double acc = 0.0;
    for (int im = 0; im < d->km(); ++im)
      acc += d->pm[mrow][a_med][im] * mu_fn(tr, t, d->mvals[im], a);
    return acc;
  };
  return z;
}

Dataset dgp_sample(const DiscreteDGP& dgp, int n, std::uint64_t seed) {
  Dataset ds;
  ds.T = dgp.T;
  ds.trajectories.resize(n);
  for (int idx = 0; idx < n; ++idx) {
    Rng rng(seed, 5, static_cast<std::uint64_t>(idx));
    Trajectory& tr = ds.trajectories[idx];
    tr.id = std::to_string(idx + 1);
    tr.x.resize(dgp.T, 1);
    tr.i.resize(dgp.T);
    tr.a.resize(dgp.T);
    tr.m.resize(dgp.T);
    int pa = 0, pmi = 0;
    long code = 0, mult = 1;
    for (int t = 1; t <= dgp.T; ++t) {
      const int pidx = prev_idx(dgp, t, pa, pmi);
      double u = rng.uniform();
      int ix = 0;
      for (; ix + 1 < dgp.kx(); ++ix) {
        if (u < dgp.px[pidx][ix]) break;
        u -= dgp.px[pidx][ix];
      }
      const int i = rng.bernoulli(dgp.pi[pidx][ix]) ? 1 : 0;
      const int a = i ? (rng.bernoulli(dgp.pa[pidx][ix]) ? 1 : 0) : 0;
      const int mrow = pm_row(dgp, t, pa, pmi, ix);
      double v = rng.uniform();
      int im = 0;
      for (; im + 1 < dgp.km(); ++im) {
        if (v < dgp.pm[mrow][a][im]) break;
        v -= dgp.pm[mrow][a][im];
      }
      tr.x(t - 1, 0) = dgp.xvals[ix];
      tr.i(t - 1) = i;
      tr.a(t - 1) = a;
      tr.m(t - 1) = dgp.mvals[im];
      code += step_code(dgp, ix, i, a, im) * mult;
      mult *= dgp.step_base();
      pa = a;
      pmi = im;
    }
    tr.y = rng.normal(dgp.ymean[code], 1.0);
  }
  return ds;
}

std::string VerifyReport::to_json() const {
  std::ostringstream os;
  os.precision(12);
  os << "{\n  \"gamma_true\": [";
  for (int k = 0; k < gamma_true.size(); ++k)
    os << (k ? ", " : "") << gamma_true(k);
  os << "],\n  \"gamma_hat\": [";
  for (int k = 0; k < gamma_hat.size(); ++k)
    os << (k ? ", " : "") << gamma_hat(k);
  os << "],\n  \"se\": [";
  for (int k = 0; k < se.size(); ++k) os << (k ? ", " : "") << se(k);
  os << "],\n  \"pass\": " << (pass ? "true" : "false") << "\n}\n";
  return os.str();
}

VerifyReport verify_estimator_on_dgp(const DiscreteDGP& dgp, int n,
                                     std::uint64_t seed,
                                     const EstimandConfig& config) {
  const Dataset ds = dgp_sample(dgp, n, seed);
  const NuisanceSet z = dgp_exact_nuisances(dgp);
  const EstimateResult res = estimate_with_nuisances(ds, z, config);
  VerifyReport rep;
  rep.gamma_true = oracle_gamma(dgp, config);
  rep.gamma_hat = res.gamma;
  rep.se = res.se;
  rep.pass = true;
  for (int k = 0; k < rep.gamma_hat.size(); ++k)
    if (std::abs(rep.gamma_hat(k) - rep.gamma_true(k)) >= 3.0 * rep.se(k))
      rep.pass = false;
  return rep;
}

}  // namespace medexc
