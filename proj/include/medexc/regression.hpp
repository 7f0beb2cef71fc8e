#pragma once

#include <Eigen/Dense>

namespace medexc {

struct LogisticFit {
  Eigen::VectorXd beta;
  bool converged = false;
  int iterations = 0;
  double grad_norm = 0.0;
  double ridge_used = 0.0;   // after any separation escalation
  int escalations = 0;

  double predict(const Eigen::VectorXd& features) const;
};

// Weighted logistic regression by IRLS with a ridge penalty on
// non-intercept coefficients (column 0 is treated as the intercept).
// On divergence (separation) the ridge is escalated x10, up to 5 times.
LogisticFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         const Eigen::VectorXd& w, double ridge = 0.0,
                         int max_iter = 100, double tol = 1e-8);

struct LinearFit {
  Eigen::VectorXd beta;
  double ridge_used = 0.0;
  bool ridge_fallback = false;

  double predict(const Eigen::VectorXd& features) const {
    return features.dot(beta);
  }
};

// Weighted least squares via the normal equations; falls back to a small
// ridge when the Gram matrix is singular.
LinearFit fit_linear(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                     const Eigen::VectorXd& w, double ridge = 0.0);

}  // namespace medexc
