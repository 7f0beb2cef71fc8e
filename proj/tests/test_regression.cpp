#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "medexc/regression.hpp"
#include "medexc/rng.hpp"

using namespace medexc;

TEST_CASE("logistic intercept-only fit recovers the log-odds") {
  const int n = 1000;
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(n, 1);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < 300; ++i) y(i) = 1.0;  // mean 0.3
  Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  auto fit = fit_logistic(X, y, w);
  CHECK(fit.converged);
  CHECK(fit.beta(0) == doctest::Approx(std::log(0.3 / 0.7)).epsilon(1e-8));
}

TEST_CASE("logistic regression is consistent for expit(1 + 2x)") {
  const int n = 20000;
  Rng rng(7);
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n), w = Eigen::VectorXd::Ones(n);
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    X(i, 0) = 1.0;
    X(i, 1) = x;
    y(i) = rng.bernoulli(expit(1.0 + 2.0 * x));
  }
  auto fit = fit_logistic(X, y, w);
  CHECK(fit.converged);
  CHECK(fit.beta(0) == doctest::Approx(1.0).epsilon(0.08));
  CHECK(fit.beta(1) == doctest::Approx(2.0).epsilon(0.08));
  // predictions respond monotonically
  Eigen::VectorXd lo(2), hi(2);
  lo << 1.0, -1.0;
  hi << 1.0, 1.0;
  CHECK(fit.predict(lo) < fit.predict(hi));
}

TEST_CASE("logistic fit requires both outcome classes") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(10, 1);
  Eigen::VectorXd y = Eigen::VectorXd::Ones(10);
  Eigen::VectorXd w = Eigen::VectorXd::Ones(10);
  CHECK_THROWS(fit_logistic(X, y, w));
}

TEST_CASE("separated data falls back to ridge instead of diverging") {
  const int n = 60;
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n), w = Eigen::VectorXd::Ones(n);
  for (int i = 0; i < n; ++i) {
    const double x = (i - n / 2) / 10.0;
    X(i, 0) = 1.0;
    X(i, 1) = x;
    y(i) = x > 0 ? 1.0 : 0.0;  // perfectly separated
  }
  auto fit = fit_logistic(X, y, w);
  CHECK(std::isfinite(fit.beta(0)));
  CHECK(std::isfinite(fit.beta(1)));
  CHECK(fit.ridge_used > 0.0);
  CHECK(fit.beta.cwiseAbs().maxCoeff() < 60.0);
}

TEST_CASE("linear fit is exact on noiseless data") {
  const int n = 50;
  Rng rng(11);
  Eigen::MatrixXd X(n, 3);
  Eigen::VectorXd y(n), w = Eigen::VectorXd::Ones(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = rng.normal();
    X(i, 2) = rng.uniform();
    y(i) = 2.0 - X(i, 1) + 0.5 * X(i, 2);
  }
  auto fit = fit_linear(X, y, w);
  CHECK(fit.beta(0) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(fit.beta(1) == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(fit.beta(2) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("weighted least squares honors the weights") {
  Eigen::MatrixXd X(4, 1);
  X << 1, 1, 1, 1;
  Eigen::VectorXd y(4), w(4);
  y << 0, 0, 10, 10;
  w << 1, 1, 3, 3;
  auto fit = fit_linear(X, y, w);
  CHECK(fit.beta(0) == doctest::Approx(7.5));
}

TEST_CASE("duplicated columns trigger the ridge fallback") {
  const int n = 40;
  Rng rng(3);
  Eigen::MatrixXd X(n, 3);
  Eigen::VectorXd y(n), w = Eigen::VectorXd::Ones(n);
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    X(i, 0) = 1.0;
    X(i, 1) = x;
    X(i, 2) = x;  // exact copy
    y(i) = 1.0 + x + 0.1 * rng.normal();
  }
  auto fit = fit_linear(X, y, w);
  CHECK(std::isfinite(fit.beta.sum()));
  // the split coefficients still sum to roughly the slope
  CHECK(fit.beta(1) + fit.beta(2) == doctest::Approx(1.0).epsilon(0.15));
  // fitted values are unaffected by how the slope is split
  Eigen::VectorXd yhat = X * fit.beta;
  double mse = (yhat - y).squaredNorm() / n;
  CHECK(mse < 0.05);
}
