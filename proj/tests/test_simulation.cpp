#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "medexc/estimator.hpp"
#include "medexc/experiment.hpp"
#include "medexc/gm1.hpp"
#include "medexc/gm2.hpp"

using namespace medexc;

TEST_CASE("gm1 panels are always eligible with binary treatment and mediator") {
  GM1Params par;
  Dataset ds = gm1_generate(par, 500, 11);
  CHECK(ds.T == 5);
  CHECK(validate_dataset(ds).ok());
  for (const auto& tr : ds.trajectories)
    for (int t = 1; t <= par.T; ++t) {
      CHECK(tr.elig(t) == 1);
      CHECK((tr.treat(t) == 0 || tr.treat(t) == 1));
      CHECK((tr.med(t) == 0.0 || tr.med(t) == 1.0));
    }
}

TEST_CASE("gm1 exact theta table agrees with counterfactual simulation") {
  GM1Params par;
  Eigen::MatrixXd exact = gm1_true_theta(par);
  Eigen::MatrixXd mc = gm1_true_theta_mc(par, 600000, 91);
  REQUIRE(exact.rows() == par.T);
  REQUIRE(exact.cols() == 4);
  CHECK((exact - mc).cwiseAbs().maxCoeff() < 0.015);
}

TEST_CASE("gm1 population effects") {
  EstimandConfig config;
  config.weights = make_uniform_weights(5);
  Eigen::VectorXd gamma = true_estimands("gm1", config);
  CHECK(gamma(0) == doctest::Approx(1.381).epsilon(0.01));
  CHECK(gamma(1) == doctest::Approx(0.822).epsilon(0.01));
}

TEST_CASE("gm2 respects the eligibility constraint") {
  GM2Params par;
  Dataset ds = gm2_generate(par, 400, 17);
  CHECK(ds.T == 30);
  CHECK(validate_dataset(ds).ok());
  long elig = 0, total = 0, treated_inelig = 0;
  double elig_t1 = 0;
  for (const auto& tr : ds.trajectories) {
    elig_t1 += tr.elig(1);
    for (int t = 1; t <= par.T; ++t) {
      elig += tr.elig(t);
      ++total;
      if (!tr.elig(t) && tr.treat(t) == 1) ++treated_inelig;
    }
  }
  CHECK(treated_inelig == 0);
  // eligibility is common but not universal
  const double rate = static_cast<double>(elig) / total;
  CHECK(rate > 0.5);
  CHECK(rate < 0.95);
  // at t = 1 the rate is E expit(1.5 + 0.3 X) with X standard normal
  CHECK(elig_t1 / ds.n() == doctest::Approx(0.808).epsilon(0.08));
}

TEST_CASE("gm2 population effects match the reference values") {
  GM2Params par;
  Eigen::MatrixXd theta = gm2_true_theta_mc(par, 150000, 5150, 1);
  EstimandConfig config;
  config.weights = make_uniform_weights(par.T);
  Eigen::VectorXd gamma = project_contrasts(theta, config);
  CHECK(gamma(0) == doctest::Approx(0.285).epsilon(0.05));
  CHECK(gamma(1) == doctest::Approx(0.121).epsilon(0.05));
}

TEST_CASE("gm2 truth simulation is deterministic and thread-invariant") {
  GM2Params par;
  Eigen::MatrixXd a = gm2_true_theta_mc(par, 20000, 7, 1);
  Eigen::MatrixXd a2 = gm2_true_theta_mc(par, 20000, 7, 1);
  Eigen::MatrixXd b = gm2_true_theta_mc(par, 20000, 7, 2);
  // same seed and thread count: bit identical
  CHECK((a - a2).cwiseAbs().maxCoeff() == 0.0);
  // thread count only reorders partial sums
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("plan json parsing applies defaults and validates") {
  const std::string text = R"([
    {"generator":"gm1","scenario":"exact","n":500,"replicates":10},
    {"generator":"gm2","scenario":"s3","n":300,"replicates":5,
     "f":"linear","omega":"uniform","effects":"swapped","crossfit":2,
     "seed":99,"r1":0.3,"r2":0.5}
  ])";
  auto plan = parse_plan_json(text);
  REQUIRE(plan.size() == 2);
  CHECK(plan[0].f == "constant");
  CHECK(plan[0].seed == 1);
  CHECK(plan[0].crossfit == 0);
  CHECK(plan[1].scenario == "s3");
  CHECK(plan[1].effects == "swapped");
  CHECK(plan[1].r2 == 0.5);

  CHECK_THROWS(parse_plan_json("not json"));
  CHECK_THROWS(parse_plan_json(R"([{"generator":"gm1","scenario":"exact",
                                    "n":1,"replicates":3}])"));
}

TEST_CASE("metrics csv layout") {
  CellMetrics row;
  row.generator = "gm1";
  row.scenario = "exact";
  row.n = 100;
  row.param = "alpha";
  row.replicates = 3;
  const std::string csv = metrics_csv({row});
  CHECK(csv.rfind("generator,scenario,n,r1,r2,param,bias,rootn_abs_bias,rmse,"
                  "ase_sd,coverage,mc_se_coverage,replicates,failed\n",
                  0) == 0);
  CHECK(csv.find("gm1,exact,100,") != std::string::npos);
}

TEST_CASE("a small experiment cell produces finite calibrated metrics") {
  PlanCell cell;
  cell.generator = "gm1";
  cell.scenario = "exact";
  cell.n = 200;
  cell.replicates = 20;
  cell.seed = 12;
  auto rows = run_experiment({cell}, 1);
  REQUIRE(rows.size() == 2);  // alpha and beta
  for (const auto& r : rows) {
    CHECK(r.failed == 0);
    CHECK(r.replicates == 20);
    CHECK(std::isfinite(r.bias));
    CHECK(std::isfinite(r.rmse));
    CHECK(r.rmse > 0.0);
    CHECK(std::abs(r.bias) < 0.5);
    CHECK(r.coverage >= 0.0);
    CHECK(r.coverage <= 1.0);
    CHECK(std::isfinite(r.mc_se_coverage));
  }
  CHECK(rows[0].param == "alpha");
  CHECK(rows[1].param == "beta");
}

TEST_CASE("experiment replication is deterministic in the seed") {
  PlanCell cell;
  cell.generator = "gm1";
  cell.scenario = "exact";
  cell.n = 120;
  cell.replicates = 6;
  cell.seed = 4;
  auto a = run_experiment({cell}, 1);
  auto b = run_experiment({cell}, 1);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].bias == b[k].bias);
    CHECK(a[k].rmse == b[k].rmse);
    CHECK(a[k].coverage == b[k].coverage);
  }
}

TEST_CASE("unknown scenarios are rejected") {
  PlanCell cell;
  cell.generator = "gm1";
  cell.scenario = "s1";  // gm2-only scenario
  cell.n = 50;
  cell.replicates = 2;
  CHECK_THROWS_AS(run_experiment({cell}, 1), std::invalid_argument);
  cell.generator = "nope";
  CHECK_THROWS_AS(run_experiment({cell}, 1), std::invalid_argument);
}
