#include "medexc/bspline.hpp"

#include <algorithm>
#include <cmath>

namespace medexc {

namespace {
constexpr int kDegree = 3;
}

BSplineBasis::BSplineBasis(double lo, double hi,
                           const std::vector<double>& interior)
    : lo_(lo), hi_(hi), df_(static_cast<int>(interior.size()) + kDegree + 1) {
  if (!(hi > lo)) throw std::invalid_argument("bspline: hi must exceed lo");
  for (double k : interior) {
    if (k <= lo || k >= hi)
      throw std::invalid_argument("bspline: interior knot outside (lo, hi)");
  }
  knots_.assign(kDegree + 1, lo);
  knots_.insert(knots_.end(), interior.begin(), interior.end());
  knots_.insert(knots_.end(), kDegree + 1, hi);
  if (!std::is_sorted(knots_.begin(), knots_.end()))
    throw std::invalid_argument("bspline: interior knots must be sorted");
}

BSplineBasis BSplineBasis::equally_spaced(double lo, double hi, int df) {
  if (df < kDegree + 1)
    throw std::invalid_argument("bspline: df must be at least 4 (cubic)");
  const int n_int = df - kDegree - 1;
  std::vector<double> interior(n_int);
  for (int i = 0; i < n_int; ++i)
    interior[i] = lo + (hi - lo) * (i + 1) / (n_int + 1.0);
  return BSplineBasis(lo, hi, interior);
}

BSplineBasis BSplineBasis::from_quantiles(const Eigen::VectorXd& values,
                                          int df) {
  if (df < kDegree + 1)
    throw std::invalid_argument("bspline: df must be at least 4 (cubic)");
  if (values.size() < 2)
    throw std::invalid_argument("bspline: need at least 2 values");
  std::vector<double> v(values.data(), values.data() + values.size());
  std::sort(v.begin(), v.end());
  const double lo = v.front(), hi = v.back();
  if (!(hi > lo)) throw std::invalid_argument("bspline: constant sample");
  const int n_int = df - kDegree - 1;
  std::vector<double> interior;
  interior.reserve(n_int);
  for (int i = 0; i < n_int; ++i) {
    const double p = (i + 1) / (n_int + 1.0);
    double q = v[std::min(v.size() - 1,
                          static_cast<std::size_t>(p * (v.size() - 1)))];
    // nudge duplicates / boundary collisions inward
    q = std::min(std::max(q, lo + 1e-9 * (hi - lo)), hi - 1e-9 * (hi - lo));
    if (!interior.empty() && q <= interior.back())
      q = interior.back() + 1e-9 * (hi - lo);
    interior.push_back(q);
  }
  return BSplineBasis(lo, hi, interior);
}

Eigen::VectorXd BSplineBasis::evaluate(double x) const {
  Eigen::VectorXd out(df_);
  evaluate_into(x, out.data());
  return out;
}

// Cox-de Boor recursion over the full knot vector.
void BSplineBasis::evaluate_into(double x, double* out) const {
  x = std::min(std::max(x, lo_), hi_);
  const int n_knots = static_cast<int>(knots_.size());
  const int n_b = n_knots - kDegree - 1;  // == df_
  std::vector<double> b(n_knots - 1, 0.0);
  // degree 0
  for (int i = 0; i + 1 < n_knots; ++i) {
    const bool last_span = (knots_[i + 1] >= hi_ && x >= hi_);
    b[i] = ((x >= knots_[i] && x < knots_[i + 1]) ||
            (last_span && knots_[i] < knots_[i + 1]))
               ? 1.0
               : 0.0;
  }
  for (int d = 1; d <= kDegree; ++d) {
    for (int i = 0; i + d + 1 < n_knots; ++i) {
      double left = 0.0, right = 0.0;
      const double dl = knots_[i + d] - knots_[i];
      const double dr = knots_[i + d + 1] - knots_[i + 1];
      if (dl > 0.0) left = (x - knots_[i]) / dl * b[i];
      if (dr > 0.0) right = (knots_[i + d + 1] - x) / dr * b[i + 1];
      b[i] = left + right;
    }
  }
  for (int i = 0; i < n_b; ++i) out[i] = b[i];
}

}  // namespace medexc
