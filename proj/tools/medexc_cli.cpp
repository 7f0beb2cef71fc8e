#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "medexc/dataset.hpp"
#include "medexc/estimator.hpp"
#include "medexc/experiment.hpp"
#include "medexc/gm1.hpp"
#include "medexc/gm2.hpp"
#include "medexc/oracle.hpp"

namespace {

using namespace medexc;

int cmd_simulate(const std::string& gm, int n, std::uint64_t seed,
                 const std::string& out) {
  Dataset ds;
  if (gm == "gm1") {
    ds = gm1_generate(GM1Params{}, n, seed);
  } else if (gm == "gm2") {
    ds = gm2_generate(GM2Params{}, n, seed);
  } else {
    std::cerr << "unknown generator: " << gm << " (use gm1 or gm2)\n";
    return 2;
  }
  save_csv(ds, out);
  long elig = 0;
  for (const auto& tr : ds.trajectories) elig += tr.i.sum();
  std::cout << "n=" << ds.n() << " T=" << ds.T << " eligibility_rate="
            << static_cast<double>(elig) / (ds.n() * ds.T) << " -> " << out
            << "\n";
  return 0;
}

struct EstimateArgs {
  std::string data, out;
  std::string f = "constant", omega = "uniform", effects = "primary";
  int crossfit = 0;
  std::uint64_t seed = 1;
  std::string known_propensity;  // "", numeric constant, "gm1", or "gm2"
  std::string time_basis = "none", x_basis = "linear",
              mediator_basis = "linear", lag_m_basis = "none";
  bool lag_a = false, interact_time_x = false, eta_zero = false,
       nu_zero = false;
  double ridge = 1e-4, clip = 0.01;
};

int cmd_estimate(const EstimateArgs& args) {
  const Dataset ds = load_csv(args.data);
  const ValidationReport report = validate_dataset(ds);
  if (!report.ok()) {
    for (const auto& v : report.violations)
      std::cerr << "data violation: participant " << v.participant << " t="
                << v.t << ": " << v.message << "\n";
    return 1;
  }

  EstimandConfig config;
  config.feature_map = FeatureMap::parse(args.f, ds.T);
  config.weights = parse_weights(args.omega, ds.T);
  if (args.effects == "primary")
    config.pair = EstimandConfig::EffectPair::Primary;
  else if (args.effects == "swapped")
    config.pair = EstimandConfig::EffectPair::Swapped;
  else if (args.effects == "total")
    config.pair = EstimandConfig::EffectPair::TotalOnly;
  else
    throw CLI::ValidationError("--effects must be primary, swapped, or total");
  config.folds = args.crossfit;

  NuisanceFitSpec spec;
  spec.base.time_basis = BasisSpec::parse(args.time_basis);
  spec.base.x_basis = BasisSpec::parse(args.x_basis);
  spec.base.mediator_basis = BasisSpec::parse(args.mediator_basis);
  spec.base.lag_m_basis = BasisSpec::parse(args.lag_m_basis);
  spec.base.lag_a = args.lag_a;
  spec.base.interact_time_x = args.interact_time_x;
  spec.base.ridge = args.ridge;
  spec.base.clip = args.clip;
  spec.eta_zero = args.eta_zero;
  spec.nu_zero = args.nu_zero;
  if (args.known_propensity == "gm1") {
    GM1Params par;
    spec.known_propensity = [par](const Trajectory& tr, int t) {
      return par.pi_treat(t, tr.xval(t));
    };
  } else if (args.known_propensity == "gm2") {
    spec.known_propensity = gm2_known_propensity(GM2Params{});
  } else if (!args.known_propensity.empty()) {
    const double c = std::stod(args.known_propensity);
    if (!(c > 0.0 && c < 1.0))
      throw CLI::ValidationError("--known-propensity constant must be in (0,1)");
    spec.known_propensity = [c](const Trajectory&, int) { return c; };
  }

  EstimateResult res = args.crossfit >= 2
                           ? estimate_crossfit(ds, spec, config, args.seed)
                           : estimate(ds, spec, config);
  res.seed = args.seed;
  const std::string json = res.to_json();
  if (args.out.empty()) {
    std::cout << json << "\n";
  } else {
    std::ofstream outf(args.out);
    if (!outf) {
      std::cerr << "cannot write " << args.out << "\n";
      return 1;
    }
    outf << json << "\n";
    std::cout << "wrote " << args.out << "\n";
  }
  return 0;
}

int cmd_mc(const std::string& plan_path, const std::string& out, int threads) {
  const auto plan = load_plan_json(plan_path);
  const auto rows = run_experiment(plan, threads);
  const std::string csv = metrics_csv(rows);
  if (out.empty()) {
    std::cout << csv;
  } else {
    std::ofstream outf(out);
    if (!outf) {
      std::cerr << "cannot write " << out << "\n";
      return 1;
    }
    outf << csv;
    std::cout << "wrote " << rows.size() << " metric rows to " << out << "\n";
  }
  return 0;
}

int cmd_verify(const std::string& dgp_path, int random_n, std::uint64_t seed,
               int sample_n) {
  if (!dgp_path.empty()) {
    std::ifstream in(dgp_path);
    if (!in) {
      std::cerr << "cannot open " << dgp_path << "\n";
      return 1;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    const DiscreteDGP dgp = DiscreteDGP::from_json(ss.str());
    const double gap = max_route_disagreement(dgp);
    const bool routes_ok = gap < 1e-10;
    std::cout << "route_disagreement " << gap << " "
              << (routes_ok ? "PASS" : "FAIL") << "\n";
    EstimandConfig config;
    config.weights = make_uniform_weights(dgp.T);
    const VerifyReport rep = verify_estimator_on_dgp(dgp, sample_n, seed, config);
    std::cout << "estimator_bias_within_3se " << (rep.pass ? "PASS" : "FAIL")
              << "\n" << rep.to_json();
    return routes_ok && rep.pass ? 0 : 1;
  }
  int agree = 0;
  double worst = 0.0;
  for (int k = 0; k < random_n; ++k) {
    const DiscreteDGP dgp = random_dgp(seed + k);
    const double gap = max_route_disagreement(dgp);
    worst = std::max(worst, gap);
    if (gap < 1e-10) ++agree;
  }
  std::cout << agree << "/" << random_n
            << " agree (max disagreement " << worst << ")\n";
  return agree == random_n ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multiply-robust excursion-effect mediation estimator"};
  app.require_subcommand(1);

  std::string gm = "gm1", sim_out;
  int sim_n = 0;
  std::uint64_t sim_seed = 0;
  bool sim_seed_set = false;
  auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset");
  sim->add_option("--gm", gm, "generator: gm1 or gm2")->required();
  sim->add_option("--n", sim_n, "participants")->required()
      ->check(CLI::PositiveNumber);
  sim->add_option("--seed", sim_seed, "RNG seed")->required();
  sim->add_option("--out", sim_out, "output CSV path")->required();
  (void)sim_seed_set;

  EstimateArgs est;
  auto* estc = app.add_subcommand("estimate", "fit the estimator on a CSV");
  estc->add_option("--data", est.data, "input CSV")->required();
  estc->add_option("--f", est.f, "projection basis");
  estc->add_option("--omega", est.omega, "time weights");
  estc->add_option("--effects", est.effects, "primary | swapped | total");
  estc->add_option("--crossfit", est.crossfit, "folds K (0 or >= 2)");
  estc->add_option("--seed", est.seed, "seed for fold assignment")->required();
  estc->add_option("--known-propensity", est.known_propensity,
                   "constant in (0,1), or gm1 / gm2 mechanism");
  estc->add_option("--time-basis", est.time_basis, "nuisance basis in t");
  estc->add_option("--x-basis", est.x_basis, "nuisance basis in X");
  estc->add_option("--mediator-basis", est.mediator_basis,
                   "nuisance basis in M");
  estc->add_option("--lag-m-basis", est.lag_m_basis, "basis in M_{t-1}");
  estc->add_flag("--lag-a", est.lag_a, "include A_{t-1}");
  estc->add_flag("--interact-time-x", est.interact_time_x,
                 "tensor time x covariates");
  estc->add_flag("--eta-zero", est.eta_zero, "force eta-hat to 0");
  estc->add_flag("--nu-zero", est.nu_zero, "force nu-hat to 0");
  estc->add_option("--ridge", est.ridge, "ridge penalty");
  estc->add_option("--clip", est.clip, "probability clipping bound");
  estc->add_option("--out", est.out, "output JSON path (default stdout)");

  std::string plan_path, mc_out;
  int mc_threads = 0;
  auto* mc = app.add_subcommand("mc", "run a Monte Carlo plan");
  mc->add_option("--plan", plan_path, "plan JSON")->required();
  mc->add_option("--out", mc_out, "metrics CSV path (default stdout)");
  mc->add_option("--threads", mc_threads,
                 "worker threads (default MEDEXC_THREADS or hardware)");

  std::string dgp_path;
  int random_n = 0, verify_sample_n = 50000;
  std::uint64_t verify_seed = 0;
  auto* ver = app.add_subcommand("verify", "oracle identification checks");
  ver->add_option("--dgp", dgp_path, "DiscreteDGP JSON path");
  ver->add_option("--random", random_n, "number of random DGPs");
  ver->add_option("--seed", verify_seed, "RNG seed")->required();
  ver->add_option("--n", verify_sample_n,
                  "sample size for the estimator check (--dgp mode)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(gm, sim_n, sim_seed, sim_out);
    if (estc->parsed()) return cmd_estimate(est);
    if (mc->parsed()) return cmd_mc(plan_path, mc_out, mc_threads);
    if (ver->parsed()) {
      if (dgp_path.empty() && random_n <= 0) {
        std::cerr << "verify: provide --dgp or --random N\n";
        return 2;
      }
      return cmd_verify(dgp_path, random_n, verify_seed, verify_sample_n);
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
