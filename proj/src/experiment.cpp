#include "medexc/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "medexc/gm1.hpp"
#include "medexc/gm2.hpp"
#include "medexc/perturb.hpp"
#include "medexc/rng.hpp"

namespace medexc {

namespace {

EstimandConfig::EffectPair parse_effects(const std::string& text) {
  if (text == "primary") return EstimandConfig::EffectPair::Primary;
  if (text == "swapped") return EstimandConfig::EffectPair::Swapped;
  if (text == "total") return EstimandConfig::EffectPair::TotalOnly;
  throw std::invalid_argument("unknown effects pair: " + text);
}

int generator_T(const std::string& generator) {
  if (generator == "gm1") return GM1Params{}.T;
  if (generator == "gm2") return GM2Params{}.T;
  throw std::invalid_argument("unknown generator: " + generator);
}

// gm2 truth tables are expensive; cache per (paths, seed)
const Eigen::MatrixXd& gm2_theta_cached(long paths, std::uint64_t seed) {
  static std::map<std::pair<long, std::uint64_t>, Eigen::MatrixXd> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_pair(paths, seed);
  auto it = cache.find(key);
  if (it == cache.end())
    it = cache.emplace(key, gm2_true_theta_mc(GM2Params{}, paths, seed)).first;
  return it->second;
}

// Fixed wrong nuisance functions for the robustness scenarios: constants
// (or a constant eligible-arm probability), far from any truth.
void set_wrong_p(NuisanceSet* z) {
  z->p = [](const Trajectory& tr, int t, int a) {
    return excursion_propensity(0.3, tr.elig(t), a);
  };
}
void set_wrong_q(NuisanceSet* z) {
  z->q = [](const Trajectory& tr, int t, double, int a) {
    if (!tr.elig(t)) return 1.0;
    return a == 1 ? 0.6 : 0.4;
  };
}
void set_wrong_eta(NuisanceSet* z) {
  z->eta = [](const Trajectory&, int, int) { return 1.0; };
}
void set_wrong_mu(NuisanceSet* z) {
  z->mu = [](const Trajectory&, int, double, int) { return 0.5; };
}
void set_wrong_nu(NuisanceSet* z) {
  z->nu = [](const Trajectory&, int, int) { return -1.0; };
}

NuisanceSet gm1_mr_nuisances(const NuisanceSet& truth,
                             const std::string& scenario) {
  NuisanceSet z = truth;
  if (scenario == "mr-i") {  // p, q correct
    set_wrong_eta(&z);
    set_wrong_mu(&z);
    set_wrong_nu(&z);
  } else if (scenario == "mr-ii") {  // p, mu correct
    set_wrong_q(&z);
    set_wrong_eta(&z);
    set_wrong_nu(&z);
  } else if (scenario == "mr-iii") {  // eta, nu, q correct
    set_wrong_p(&z);
    set_wrong_mu(&z);
  } else if (scenario == "mr-iv") {  // eta, nu, mu correct
    set_wrong_p(&z);
    set_wrong_q(&z);
  } else if (scenario == "mr-none") {
    set_wrong_p(&z);
    set_wrong_q(&z);
    set_wrong_eta(&z);
    set_wrong_mu(&z);
    set_wrong_nu(&z);
  } else {
    throw std::invalid_argument("unknown gm1 robustness scenario: " + scenario);
  }
  return z;
}

struct RepResult {
  bool ok = false;
  Eigen::VectorXd gamma, se;
  Eigen::MatrixXd ci;
};

RepResult run_replicate(const PlanCell& cell, const EstimandConfig& config,
                        const NuisanceSet* gm1_truth, long rep) {
  RepResult out;
  const std::uint64_t data_seed = Rng(cell.seed, 11, rep).next_u64();
  const std::uint64_t aux_seed = Rng(cell.seed, 12, rep).next_u64();
  EstimateResult res;
  if (cell.generator == "gm1") {
    const Dataset ds = gm1_generate(GM1Params{}, cell.n, data_seed);
    if (cell.scenario == "exact") {
      res = estimate_with_nuisances(ds, *gm1_truth, config);
    } else if (cell.scenario == "perturbed") {
      PerturbationSpec pspec{cell.r1, cell.r2, cell.n};
      const NuisanceSet z = perturb_nuisances(*gm1_truth, pspec, aux_seed);
      res = estimate_with_nuisances(ds, z, config);
    } else if (cell.scenario == "fitted") {
      const NuisanceFitSpec spec = gm1_fit_spec();
      res = cell.crossfit >= 2
                ? estimate_crossfit(ds, spec, config, aux_seed)
                : estimate(ds, spec, config);
    } else {
      res = estimate_with_nuisances(
          ds, gm1_mr_nuisances(*gm1_truth, cell.scenario), config);
    }
  } else {
    const Dataset ds = gm2_generate(GM2Params{}, cell.n, data_seed);
    int sc = 0;
    if (cell.scenario.size() == 2 && cell.scenario[0] == 's')
      sc = cell.scenario[1] - '0';
    if (sc < 1 || sc > 4)
      throw std::invalid_argument("unknown gm2 scenario: " + cell.scenario);
    const NuisanceFitSpec spec = gm2_scenario_spec(sc);
    res = cell.crossfit >= 2 ? estimate_crossfit(ds, spec, config, aux_seed)
                             : estimate(ds, spec, config);
  }
  out.gamma = res.gamma;
  out.se = res.se;
  out.ci = res.ci;
  out.ok = true;
  return out;
}

std::vector<std::string> param_names(const EstimandConfig& config) {
  const int p = config.feature_map.dim();
  std::vector<std::string> names;
  auto block = [&](const std::string& stem) {
    for (int j = 0; j < p; ++j)
      names.push_back(p == 1 ? stem : stem + std::to_string(j + 1));
  };
  if (config.pair == EstimandConfig::EffectPair::TotalOnly) {
    block("total");
  } else {
    block("alpha");
    block("beta");
  }
  return names;
}

}  // namespace

EstimandConfig cell_config(const PlanCell& cell, int T) {
  EstimandConfig config;
  config.feature_map = FeatureMap::parse(cell.f, T);
  config.weights = parse_weights(cell.omega, T);
  config.pair = parse_effects(cell.effects);
  config.folds = cell.crossfit;
  return config;
}

Eigen::VectorXd true_estimands(const std::string& generator,
                               const EstimandConfig& config, long gm2_paths,
                               std::uint64_t gm2_seed) {
  if (generator == "gm1")
    return project_contrasts(gm1_true_theta(GM1Params{}), config);
  if (generator == "gm2")
    return project_contrasts(gm2_theta_cached(gm2_paths, gm2_seed), config);
  throw std::invalid_argument("unknown generator: " + generator);
}

NuisanceFitSpec gm1_fit_spec() {
  HistoryFeatureSpec h;
  h.time_basis = BasisSpec::poly(4);  // T = 5: saturated in t
  h.x_basis = BasisSpec::bspline(6);
  h.interact_time_x = true;
  h.mediator_basis = BasisSpec::linear();
  NuisanceFitSpec spec;
  spec.base = h;
  return spec;
}

NuisanceFitSpec gm2_scenario_spec(int scenario) {
  if (scenario < 1 || scenario > 4)
    throw std::invalid_argument("gm2 scenario must be 1..4");
  HistoryFeatureSpec rich_q;  // s(t)+A_{t-1}+s(M_{t-1})+s(X_t)+s(M_t)
  rich_q.time_basis = BasisSpec::bspline(6);
  rich_q.lag_a = true;
  rich_q.lag_m_basis = BasisSpec::bspline(5);
  rich_q.x_basis = BasisSpec::bspline(6);
  rich_q.mediator_basis = BasisSpec::bspline(6);

  HistoryFeatureSpec rich_mu;  // s(t)+s(X_t)+s(M_t)
  rich_mu.time_basis = BasisSpec::bspline(6);
  rich_mu.x_basis = BasisSpec::bspline(6);
  rich_mu.mediator_basis = BasisSpec::bspline(6);

  HistoryFeatureSpec bare;  // s(t) only
  bare.time_basis = BasisSpec::bspline(6);
  bare.x_basis = BasisSpec::none();
  bare.mediator_basis = BasisSpec::none();

  NuisanceFitSpec spec;
  spec.base = rich_mu;
  spec.q_spec = (scenario == 1 || scenario == 3) ? rich_q : bare;
  spec.mu_spec = (scenario == 1 || scenario == 2) ? rich_mu : bare;
  spec.eta_zero = true;
  spec.nu_zero = true;
  spec.known_propensity = gm2_known_propensity(GM2Params{});
  return spec;
}

std::vector<PlanCell> parse_plan_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  if (!j.is_array()) throw std::invalid_argument("plan must be a JSON array");
  std::vector<PlanCell> plan;
  for (const auto& item : j) {
    PlanCell c;
    c.generator = item.value("generator", c.generator);
    c.scenario = item.value("scenario", c.scenario);
    c.n = item.value("n", c.n);
    c.replicates = item.value("replicates", c.replicates);
    c.r1 = item.value("r1", c.r1);
    c.r2 = item.value("r2", c.r2);
    c.f = item.value("f", c.f);
    c.omega = item.value("omega", c.omega);
    c.effects = item.value("effects", c.effects);
    c.crossfit = item.value("crossfit", c.crossfit);
    c.seed = item.value("seed", c.seed);
    c.truth_paths = item.value("truth_paths", c.truth_paths);
    if (c.n < 2) throw std::invalid_argument("plan cell: n must be >= 2");
    if (c.replicates < 0)
      throw std::invalid_argument("plan cell: negative replicates");
    plan.push_back(c);
  }
  return plan;
}

std::vector<PlanCell> load_plan_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open plan file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_plan_json(ss.str());
}

std::vector<CellMetrics> run_experiment(const std::vector<PlanCell>& plan,
                                        int threads) {
  const int nthreads = resolve_threads(threads);
  std::vector<CellMetrics> rows;
  for (const PlanCell& cell : plan) {
    if (cell.replicates == 0) continue;
    const int T = generator_T(cell.generator);
    if (cell.generator == "gm1") {
      static const std::vector<std::string> known = {
          "exact", "perturbed", "fitted", "mr-i",
          "mr-ii", "mr-iii",    "mr-iv",  "mr-none"};
      if (std::find(known.begin(), known.end(), cell.scenario) == known.end())
        throw std::invalid_argument("unknown gm1 scenario: " + cell.scenario);
    } else if (cell.scenario != "s1" && cell.scenario != "s2" &&
               cell.scenario != "s3" && cell.scenario != "s4") {
      throw std::invalid_argument("unknown gm2 scenario: " + cell.scenario);
    }
    const EstimandConfig config = cell_config(cell, T);
    const Eigen::VectorXd gamma_true =
        true_estimands(cell.generator, config, cell.truth_paths);

    NuisanceSet gm1_truth;
    if (cell.generator == "gm1") gm1_truth = gm1_true_nuisances(GM1Params{});

    const int R = cell.replicates;
    std::vector<RepResult> results(R);
    auto worker = [&](int w) {
      for (int r = w; r < R; r += nthreads) {
        try {
          results[r] = run_replicate(cell, config, &gm1_truth, r);
        } catch (const std::exception&) {
          results[r].ok = false;
        }
      }
    };
    if (nthreads <= 1) {
      worker(0);
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < nthreads; ++w) pool.emplace_back(worker, w);
      for (auto& th : pool) th.join();
    }

    const int dim = static_cast<int>(gamma_true.size());
    int ok = 0;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd mean_sq = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd se_sum = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd covered = Eigen::VectorXd::Zero(dim);
    for (const RepResult& res : results) {
      if (!res.ok) continue;
      ++ok;
      mean += res.gamma;
      mean_sq += res.gamma.cwiseProduct(res.gamma);
      se_sum += res.se;
      for (int j = 0; j < dim; ++j)
        if (gamma_true(j) >= res.ci(j, 0) && gamma_true(j) <= res.ci(j, 1))
          covered(j) += 1.0;
    }
    const std::vector<std::string> names = param_names(config);
    for (int j = 0; j < dim; ++j) {
      CellMetrics m;
      m.generator = cell.generator;
      m.scenario = cell.scenario;
      m.n = cell.n;
      m.r1 = cell.r1;
      m.r2 = cell.r2;
      m.param = names[j];
      m.replicates = R;
      m.failed = R - ok;
      if (ok > 0) {
        const double mu = mean(j) / ok;
        m.bias = mu - gamma_true(j);
        m.rootn_abs_bias = std::sqrt(static_cast<double>(cell.n)) *
                           std::abs(m.bias);
        const double msq = mean_sq(j) / ok;
        m.rmse = std::sqrt(std::max(
            0.0, msq - 2.0 * gamma_true(j) * mu + gamma_true(j) * gamma_true(j)));
        const double var = ok > 1 ? (msq - mu * mu) * ok / (ok - 1.0) : 0.0;
        const double sd = std::sqrt(std::max(0.0, var));
        m.ase_sd = sd > 0 ? (se_sum(j) / ok) / sd : 0.0;
        m.coverage = covered(j) / ok;
        m.mc_se_coverage = std::sqrt(m.coverage * (1.0 - m.coverage) / ok);
      }
      rows.push_back(m);
    }
  }
  return rows;
}

std::string metrics_csv(const std::vector<CellMetrics>& rows) {
  std::ostringstream os;
  os.precision(10);
  os << "generator,scenario,n,r1,r2,param,bias,rootn_abs_bias,rmse,ase_sd,"
        "coverage,mc_se_coverage,replicates,failed\n";
  for (const CellMetrics& m : rows)
    os << m.generator << ',' << m.scenario << ',' << m.n << ',' << m.r1 << ','
       << m.r2 << ',' << m.param << ',' << m.bias << ',' << m.rootn_abs_bias
       << ',' << m.rmse << ',' << m.ase_sd << ',' << m.coverage << ','
       << m.mc_se_coverage << ',' << m.replicates << ',' << m.failed << '\n';
  return os.str();
}

}  // namespace medexc
