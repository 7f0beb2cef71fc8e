#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

namespace medexc {

// Cubic B-spline basis with a fixed knot sequence. The raw basis forms a
// partition of unity on [lo, hi], so the span includes the intercept and a
// basis of df functions plays the role of an intercept-included design block.
class BSplineBasis {
 public:
  // df basis functions (df >= 4 for cubic), boundary knots [lo, hi],
  // df - 4 interior knots placed by the caller.
  BSplineBasis(double lo, double hi, const std::vector<double>& interior);

  // Convenience: interior knots equally spaced in (lo, hi).
  static BSplineBasis equally_spaced(double lo, double hi, int df);

  // Interior knots at empirical quantiles of the sample.
  static BSplineBasis from_quantiles(const Eigen::VectorXd& values, int df);

  int df() const { return df_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }

  // Values of all df basis functions at x; x is clamped to [lo, hi].
  Eigen::VectorXd evaluate(double x) const;

  void evaluate_into(double x, double* out) const;

 private:
  double lo_, hi_;
  int df_;
  std::vector<double> knots_;  // full knot vector with repeated boundaries
};

}  // namespace medexc
