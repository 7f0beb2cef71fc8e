#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "medexc/bspline.hpp"

namespace medexc {

// One participant's panel: rows t = 1..T of (X_t, I_t, A_t, M_t) plus the
// distal outcome Y. Time arguments throughout the library are 1-based.
struct Trajectory {
  std::string id;
  Eigen::MatrixXd x;   // T x d covariates
  Eigen::VectorXi i;   // eligibility in {0,1}
  Eigen::VectorXi a;   // treatment in {0,1}
  Eigen::VectorXd m;   // mediator
  double y = 0.0;

  int T() const { return static_cast<int>(m.size()); }
  int xdim() const { return static_cast<int>(x.cols()); }
  double xval(int t, int j = 0) const { return x(t - 1, j); }
  int elig(int t) const { return i(t - 1); }
  int treat(int t) const { return a(t - 1); }
  double med(int t) const { return m(t - 1); }
};

struct Dataset {
  std::vector<Trajectory> trajectories;
  int T = 0;

  int n() const { return static_cast<int>(trajectories.size()); }
  int xdim() const {
    return trajectories.empty() ? 0 : trajectories.front().xdim();
  }
};

struct Violation {
  std::string participant;
  int t;  // 0 when not time-specific
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

ValidationReport validate_dataset(const Dataset& ds);

// CSV long format: header id,t,I,A,M,Y,X1,...,Xd; one row per (id, t);
// each id must cover t = 1..T exactly once with a constant Y.
Dataset load_csv(const std::string& path);
void save_csv(const Dataset& ds, const std::string& path);

// Feature map f(t) for the projection basis.
class FeatureMap {
 public:
  enum class Kind { Constant, LinearInT, Polynomial, BSpline };

  static FeatureMap constant();
  static FeatureMap linear_in_t();
  static FeatureMap polynomial(int degree);
  static FeatureMap bspline(int df, int T);
  // "constant" | "linear" | "poly:<deg>" | "bspline:<df>"
  static FeatureMap parse(const std::string& text, int T);

  int dim() const { return dim_; }
  Kind kind() const { return kind_; }
  std::string describe() const;
  Eigen::VectorXd evaluate(int t) const;

 private:
  FeatureMap(Kind kind, int dim) : kind_(kind), dim_(dim) {}
  Kind kind_;
  int dim_;
  int degree_ = 0;
  std::vector<BSplineBasis> basis_;  // empty unless BSpline
};

struct WeightVector {
  Eigen::VectorXd w;  // length T, nonnegative, sums to 1
  int T() const { return static_cast<int>(w.size()); }
};

WeightVector make_uniform_weights(int T);
WeightVector make_pointmass_weights(int t0, int T);
WeightVector make_custom_weights(const Eigen::VectorXd& raw);
// "uniform" | "point:<t0>" | "custom:w1,w2,..."
WeightVector parse_weights(const std::string& text, int T);

}  // namespace medexc
