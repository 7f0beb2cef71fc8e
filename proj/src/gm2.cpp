#include "medexc/gm2.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>
#include <vector>

#include "medexc/rng.hpp"

namespace medexc {

double GM2Params::h3(int t, double z) const {
  return std::tanh(3.0 * (2.0 * t - T) / static_cast<double>(T)) + std::sin(z);
}

double GM2Params::pi_treat(int t, double prev_a, double prev_m,
                           double x) const {
  return expit(0.2 * prev_a + 0.2 * h3(t, prev_m) + 0.3 * h3(t, x));
}

double GM2Params::y_term(int t, double x, double m, double a) const {
  return 0.3 * h3(t, x) + 0.4 * h3(t, m) + 0.2 * a + 0.1 * a * h3(t, m);
}

namespace {

struct GM2Noise {
  std::vector<double> ex, em;  // standard normal shocks for X_t, M_t
  std::vector<double> ui, ua;  // uniforms for I_t, A_t
  explicit GM2Noise(int T) : ex(T), em(T), ui(T), ua(T) {}
  void fill(Rng& rng) {
    for (std::size_t t = 0; t < ex.size(); ++t) {
      ex[t] = rng.normal();
      em[t] = rng.normal();
      ui[t] = rng.uniform();
      ua[t] = rng.uniform();
    }
  }
};

struct GM2State {
  double x = 0, m = 0;
  int i = 0, a = 0;
};

// One sequential step given the previous state and the shocks at t; when
// forced_a >= 0 the treatment is set to I_t * forced_a, and when forced_b >= 0
// the mediator mean uses I_t * forced_b in place of the realized treatment.
GM2State gm2_step(const GM2Params& par, int t, const GM2State& prev,
                  const GM2Noise& z, int forced_a = -1, int forced_b = -1) {
  GM2State cur;
  cur.x = 0.3 * prev.x + 0.2 * prev.a + 0.2 * prev.m + z.ex[t - 1];
  const double pi_i = expit(1.5 - 0.3 * prev.a - 0.3 * prev.m + 0.3 * cur.x);
  cur.i = z.ui[t - 1] < pi_i ? 1 : 0;
  if (forced_a >= 0) {
    cur.a = cur.i * forced_a;
  } else {
    const double pi_a = cur.i * par.pi_treat(t, prev.a, prev.m, cur.x);
    cur.a = z.ua[t - 1] < pi_a ? 1 : 0;
  }
  const double a_for_m = forced_b >= 0 ? cur.i * forced_b : cur.a;
  cur.m = 0.4 * prev.a + 0.4 * par.h3(t, prev.m) + 0.3 * par.h3(t, cur.x) +
          0.6 * a_for_m + z.em[t - 1];
  return cur;
}

}  // namespace

Dataset gm2_generate(const GM2Params& par, int n, std::uint64_t seed) {
  Dataset ds;
  ds.T = par.T;
  ds.trajectories.resize(n);
  GM2Noise z(par.T);
  for (int idx = 0; idx < n; ++idx) {
    Rng rng(seed, 1, static_cast<std::uint64_t>(idx));
    z.fill(rng);
    Trajectory& tr = ds.trajectories[idx];
    tr.id = std::to_string(idx + 1);
    tr.x.resize(par.T, 1);
    tr.i.resize(par.T);
    tr.a.resize(par.T);
    tr.m.resize(par.T);
    GM2State st;
    double ymean = 0.0;
    for (int t = 1; t <= par.T; ++t) {
      st = gm2_step(par, t, st, z);
      tr.x(t - 1, 0) = st.x;
      tr.i(t - 1) = st.i;
      tr.a(t - 1) = st.a;
      tr.m(t - 1) = st.m;
      ymean += par.y_term(t, st.x, st.m, st.a);
    }
    tr.y = rng.normal(ymean, 1.0);
  }
  return ds;
}

PropensityFn gm2_known_propensity(const GM2Params& par) {
  return [par](const Trajectory& tr, int t) {
    const double prev_a = t > 1 ? tr.treat(t - 1) : 0.0;
    const double prev_m = t > 1 ? tr.med(t - 1) : 0.0;
    return par.pi_treat(t, prev_a, prev_m, tr.xval(t));
  };
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("MEDEXC_THREADS")) {
    const int k = std::atoi(env);
    if (k > 0) return k;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

Eigen::MatrixXd gm2_true_theta_mc(const GM2Params& par, long n_paths,
                                  std::uint64_t seed, int threads) {
  const int T = par.T;
  const int aa[4] = {0, 1, 0, 1};
  const int bb[4] = {0, 0, 1, 1};

  auto run_range = [&](long lo, long hi, Eigen::MatrixXd& acc) {
    GM2Noise z(T);
    std::vector<GM2State> natural(T + 1);  // natural[t] is the state at t
    Eigen::VectorXd natural_y(T + 1);      // cumulative outcome-mean prefix
    for (long r = lo; r < hi; ++r) {
      Rng rng(seed, 2, static_cast<std::uint64_t>(r));
      z.fill(rng);
      natural[0] = GM2State{};
      natural_y(0) = 0.0;
      for (int t = 1; t <= T; ++t) {
        natural[t] = gm2_step(par, t, natural[t - 1], z);
        natural_y(t) = natural_y(t - 1) +
                       par.y_term(t, natural[t].x, natural[t].m, natural[t].a);
      }
      for (int t = 1; t <= T; ++t) {
        for (int c = 0; c < 4; ++c) {
          GM2State st = gm2_step(par, t, natural[t - 1], z, aa[c], bb[c]);
          double y = natural_y(t - 1) + par.y_term(t, st.x, st.m, st.a);
          for (int s = t + 1; s <= T; ++s) {
            st = gm2_step(par, s, st, z);
            y += par.y_term(s, st.x, st.m, st.a);
          }
          acc(t - 1, c) += y;
        }
      }
    }
  };

  const int k = std::min<long>(resolve_threads(threads), n_paths > 0 ? n_paths : 1);
  std::vector<Eigen::MatrixXd> partial(k, Eigen::MatrixXd::Zero(T, 4));
  if (k <= 1) {
    run_range(0, n_paths, partial[0]);
  } else {
    std::vector<std::thread> workers;
    const long chunk = (n_paths + k - 1) / k;
    for (int w = 0; w < k; ++w) {
      const long lo = w * chunk, hi = std::min<long>(n_paths, lo + chunk);
      workers.emplace_back([&, lo, hi, w] { run_range(lo, hi, partial[w]); });
    }
    for (auto& th : workers) th.join();
  }
  Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(T, 4);
  for (const auto& p : partial) theta += p;
  return theta / static_cast<double>(n_paths);
}

}  // namespace medexc
