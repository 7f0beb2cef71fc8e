#include "medexc/regression.hpp"

#include <cmath>
#include <stdexcept>

#include "medexc/rng.hpp"

namespace medexc {

double LogisticFit::predict(const Eigen::VectorXd& features) const {
  return expit(features.dot(beta));
}

namespace {

// One IRLS run at a fixed ridge. Returns false if the iterates diverge.
bool irls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
          const Eigen::VectorXd& w, double ridge, int max_iter, double tol,
          LogisticFit* fit) {
  const int p = static_cast<int>(X.cols());
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(p, ridge);
  penalty(0) = 0.0;  // intercept unpenalized

  for (int it = 1; it <= max_iter; ++it) {
    Eigen::VectorXd lin = X * beta;
    Eigen::VectorXd prob = lin.unaryExpr([](double v) { return expit(v); });
    Eigen::VectorXd grad =
        X.transpose() * (w.cwiseProduct(y - prob)) - penalty.cwiseProduct(beta);
    Eigen::VectorXd s =
        w.cwiseProduct(prob.cwiseProduct((1.0 - prob.array()).matrix()));
    Eigen::MatrixXd H = X.transpose() * s.asDiagonal() * X;
    H.diagonal() += penalty;
    H.diagonal().array() += 1e-12;  // guard against flat likelihood
    Eigen::VectorXd step = H.ldlt().solve(grad);
    // damp oversized Newton steps
    const double step_inf = step.cwiseAbs().maxCoeff();
    if (step_inf > 5.0) step *= 5.0 / step_inf;
    beta += step;
    fit->iterations = it;
    if (!beta.allFinite() || beta.cwiseAbs().maxCoeff() > 50.0) {
      fit->beta = beta;
      return false;  // separation-style divergence
    }
    lin = X * beta;
    prob = lin.unaryExpr([](double v) { return expit(v); });
    grad = X.transpose() * (w.cwiseProduct(y - prob)) -
           penalty.cwiseProduct(beta);
    fit->grad_norm = grad.cwiseAbs().maxCoeff();
    if (fit->grad_norm < tol) {
      fit->beta = beta;
      fit->converged = true;
      return true;
    }
  }
  fit->beta = beta;  // last iterate, reported unconverged
  return true;
}

}  // namespace

LogisticFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         const Eigen::VectorXd& w, double ridge, int max_iter,
                         double tol) {
  if (X.rows() != y.size() || X.rows() != w.size())
    throw std::invalid_argument("fit_logistic: dimension mismatch");
  double wpos = 0.0, wneg = 0.0;
  for (int i = 0; i < y.size(); ++i) {
    if (w(i) <= 0.0) continue;
    (y(i) > 0.5 ? wpos : wneg) += w(i);
  }
  if (wpos <= 0.0 || wneg <= 0.0)
    throw std::invalid_argument(
        "fit_logistic: need both positive and negative labels");

  LogisticFit fit;
  double lam = ridge;
  for (int esc = 0; esc <= 5; ++esc) {
    fit = LogisticFit{};
    fit.ridge_used = lam;
    fit.escalations = esc;
    if (irls(X, y, w, lam, max_iter, tol, &fit)) return fit;
    lam = (lam == 0.0) ? 1e-4 : lam * 10.0;
  }
  return fit;  // last escalation's iterate
}

LinearFit fit_linear(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                     const Eigen::VectorXd& w, double ridge) {
  if (X.rows() != y.size() || X.rows() != w.size())
    throw std::invalid_argument("fit_linear: dimension mismatch");
  const int p = static_cast<int>(X.cols());
  if (X.rows() < p)
    throw std::invalid_argument("fit_linear: fewer rows than columns");

  Eigen::MatrixXd G = X.transpose() * w.asDiagonal() * X;
  Eigen::VectorXd b = X.transpose() * w.cwiseProduct(y);

  LinearFit fit;
  fit.ridge_used = ridge;
  double lam = ridge;
  const double scale = G.diagonal().cwiseAbs().maxCoeff();
  for (int attempt = 0; attempt < 8; ++attempt) {
    Eigen::MatrixXd Gr = G;
    Gr.diagonal().array() += lam;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(Gr);
    if (ldlt.info() == Eigen::Success) {
      Eigen::VectorXd beta = ldlt.solve(b);
      const double resid = (Gr * beta - b).cwiseAbs().maxCoeff();
      const double rhs = std::max(1.0, b.cwiseAbs().maxCoeff());
      if (beta.allFinite() && resid < 1e-8 * rhs) {
        fit.beta = beta;
        fit.ridge_used = lam;
        return fit;
      }
    }
    fit.ridge_fallback = true;
    lam = (lam == 0.0) ? 1e-10 * std::max(scale, 1.0) : lam * 100.0;
  }
  throw std::runtime_error("fit_linear: rank-deficient after ridge fallback");
}

}  // namespace medexc
