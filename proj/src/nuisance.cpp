#include "medexc/nuisance.hpp"

#include <algorithm>
#include <stdexcept>

#include "medexc/regression.hpp"
#include "medexc/rng.hpp"

namespace medexc {

double clip_probability(double v, double clip, std::atomic<long>* counter) {
  if (v < clip) {
    if (counter) counter->fetch_add(1, std::memory_order_relaxed);
    return clip;
  }
  if (v > 1.0 - clip) {
    if (counter) counter->fetch_add(1, std::memory_order_relaxed);
    return 1.0 - clip;
  }
  return v;
}

BasisSpec BasisSpec::parse(const std::string& text) {
  if (text == "none") return none();
  if (text == "linear") return linear();
  if (text.rfind("poly:", 0) == 0) return poly(std::stoi(text.substr(5)));
  if (text.rfind("bspline:", 0) == 0)
    return bspline(std::stoi(text.substr(8)));
  throw std::invalid_argument("unknown basis spec '" + text + "'");
}

std::string BasisSpec::describe() const {
  switch (kind) {
    case Kind::None: return "none";
    case Kind::Linear: return "linear";
    case Kind::Poly: return "poly:" + std::to_string(param);
    case Kind::BSpline: return "bspline:" + std::to_string(param);
  }
  return "?";
}

int FeatureBuilder::basis_dim(const BasisSpec& b) const {
  switch (b.kind) {
    case BasisSpec::Kind::None: return 0;
    case BasisSpec::Kind::Linear: return 1;
    case BasisSpec::Kind::Poly: return b.param;
    case BasisSpec::Kind::BSpline: return b.param;
  }
  return 0;
}

namespace {

Eigen::VectorXd pooled_column(const Dataset& ds,
                              const std::function<double(const Trajectory&, int)>& get) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(ds.n()) * ds.T);
  Eigen::Index k = 0;
  for (const auto& tr : ds.trajectories)
    for (int t = 1; t <= ds.T; ++t) out(k++) = get(tr, t);
  return out;
}

}  // namespace

FeatureBuilder::FeatureBuilder(const Dataset& ds,
                               const HistoryFeatureSpec& spec)
    : spec_(spec), T_(ds.T) {
  auto make_bs = [&](const BasisSpec& b,
                     const std::function<double(const Trajectory&, int)>& get)
      -> std::optional<BSplineBasis> {
    if (b.kind != BasisSpec::Kind::BSpline) return std::nullopt;
    return BSplineBasis::from_quantiles(pooled_column(ds, get), b.param);
  };

  if (spec_.time_basis.kind == BasisSpec::Kind::BSpline)
    time_bs_ = BSplineBasis::equally_spaced(1.0, static_cast<double>(T_),
                                            spec_.time_basis.param);
  lag_m_bs_ = make_bs(spec_.lag_m_basis, [](const Trajectory& tr, int t) {
    return t > 1 ? tr.med(t - 1) : 0.0;
  });
  med_bs_ = make_bs(spec_.mediator_basis,
                    [](const Trajectory& tr, int t) { return tr.med(t); });
  const int d = ds.xdim();
  if (spec_.x_basis.kind == BasisSpec::Kind::BSpline) {
    for (int j = 0; j < d; ++j)
      x_bs_.push_back(BSplineBasis::from_quantiles(
          pooled_column(ds, [j](const Trajectory& tr, int t) {
            return tr.xval(t, j);
          }),
          spec_.x_basis.param));
  }

  time_dim_ = basis_dim(spec_.time_basis);
  lag_dim_ = (spec_.lag_a ? 1 : 0) + basis_dim(spec_.lag_m_basis);
  x_block_dim_ = d * basis_dim(spec_.x_basis);
  inter_dim_ = spec_.interact_time_x ? time_dim_ * x_block_dim_ : 0;
  hist_dim_ = 1 + time_dim_ + lag_dim_ + x_block_dim_ + inter_dim_;
  med_dim_ = basis_dim(spec_.mediator_basis);
}

void FeatureBuilder::eval_basis(const BasisSpec& b,
                                const std::optional<BSplineBasis>& bs,
                                double v, double* out) const {
  switch (b.kind) {
    case BasisSpec::Kind::None:
      return;
    case BasisSpec::Kind::Linear:
      out[0] = v;
      return;
    case BasisSpec::Kind::Poly: {
      double pw = v;
      for (int k = 0; k < b.param; ++k) {
        out[k] = pw;
        pw *= v;
      }
      return;
    }
    case BasisSpec::Kind::BSpline:
      bs->evaluate_into(v, out);
      return;
  }
}

Eigen::VectorXd FeatureBuilder::history(const Trajectory& tr, int t) const {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(hist_dim_);
  int pos = 0;
  f(pos++) = 1.0;
  if (time_dim_ > 0) {
    // time basis in t-1 for poly, raw t for splines
    if (spec_.time_basis.kind == BasisSpec::Kind::BSpline)
      time_bs_->evaluate_into(static_cast<double>(t), f.data() + pos);
    else
      eval_basis(spec_.time_basis, std::nullopt, static_cast<double>(t - 1),
                 f.data() + pos);
    pos += time_dim_;
  }
  if (spec_.lag_a) f(pos++) = (t > 1) ? tr.treat(t - 1) : 0.0;
  if (const int dm = basis_dim(spec_.lag_m_basis); dm > 0) {
    eval_basis(spec_.lag_m_basis, lag_m_bs_, t > 1 ? tr.med(t - 1) : 0.0,
               f.data() + pos);
    pos += dm;
  }
  const int d = tr.xdim();
  const int bx = d > 0 ? x_block_dim_ / d : 0;
  const int x_start = pos;
  for (int j = 0; j < d && bx > 0; ++j) {
    if (spec_.x_basis.kind == BasisSpec::Kind::BSpline)
      x_bs_[j].evaluate_into(tr.xval(t, j), f.data() + pos);
    else
      eval_basis(spec_.x_basis, std::nullopt, tr.xval(t, j), f.data() + pos);
    pos += bx;
  }
  if (inter_dim_ > 0) {
    for (int u = 0; u < time_dim_; ++u)
      for (int v = 0; v < x_block_dim_; ++v)
        f(pos++) = f(1 + u) * f(x_start + v);
  }
  return f;
}

void FeatureBuilder::append_mediator(double m, Eigen::VectorXd* out) const {
  if (med_dim_ == 0) return;
  eval_basis(spec_.mediator_basis, med_bs_, m,
             out->data() + (out->size() - med_dim_));
}

Eigen::VectorXd FeatureBuilder::with_mediator(const Trajectory& tr, int t,
                                              double m) const {
  Eigen::VectorXd f(full_dim());
  f.head(hist_dim_) = history(tr, t);
  append_mediator(m, &f);
  return f;
}

namespace {

struct RowRef {
  int i;  // trajectory index
  int t;
};

std::vector<RowRef> all_rows(const Dataset& ds) {
  std::vector<RowRef> rows;
  rows.reserve(static_cast<std::size_t>(ds.n()) * ds.T);
  for (int i = 0; i < ds.n(); ++i)
    for (int t = 1; t <= ds.T; ++t) rows.push_back({i, t});
  return rows;
}

Eigen::MatrixXd design(const Dataset& ds, const FeatureBuilder& fb,
                       const std::vector<RowRef>& rows, bool with_m) {
  Eigen::MatrixXd X(rows.size(), with_m ? fb.full_dim() : fb.history_dim());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& tr = ds.trajectories[rows[r].i];
    X.row(r) = with_m
                   ? fb.with_mediator(tr, rows[r].t, tr.med(rows[r].t))
                         .transpose()
                   : fb.history(tr, rows[r].t).transpose();
  }
  return X;
}

}  // namespace

NuisanceSet fit_nuisance_set(const Dataset& ds, const NuisanceFitSpec& spec) {
  if (ds.n() < 2 || ds.T < 1)
    throw std::invalid_argument("fit_nuisance_set: degenerate dataset");

  NuisanceSet out;
  out.provenance = spec.known_propensity ? NuisanceSet::Provenance::KnownPropensity
                                         : NuisanceSet::Provenance::Fitted;
  auto clip_counter = out.clip_events;

  const auto rows = all_rows(ds);
  std::vector<RowRef> eligible;
  for (const auto& r : rows)
    if (ds.trajectories[r.i].elig(r.t)) eligible.push_back(r);

  auto labels = [&](const std::vector<RowRef>& rs) {
    Eigen::VectorXd y(rs.size());
    for (std::size_t r = 0; r < rs.size(); ++r)
      y(r) = ds.trajectories[rs[r].i].treat(rs[r].t);
    return y;
  };
  auto outcomes = [&](const std::vector<RowRef>& rs) {
    Eigen::VectorXd y(rs.size());
    for (std::size_t r = 0; r < rs.size(); ++r)
      y(r) = ds.trajectories[rs[r].i].y;
    return y;
  };
  auto unit_w = [](std::size_t n) { return Eigen::VectorXd::Ones(n); };

  // p-hat: A on history features among eligible rows, or the known mechanism
  const HistoryFeatureSpec p_hspec = spec.base;
  const double clip = spec.base.clip;
  if (spec.known_propensity) {
    auto pi = spec.known_propensity;
    out.p = [pi](const Trajectory& tr, int t, int a) {
      return excursion_propensity(pi(tr, t), tr.elig(t), a);
    };
  } else {
    if (eligible.empty())
      throw std::runtime_error("fit_nuisance_set: no eligible rows for p-hat");
    auto fb = std::make_shared<FeatureBuilder>(ds, p_hspec);
    auto fit = std::make_shared<LogisticFit>(fit_logistic(
        design(ds, *fb, eligible, false), labels(eligible),
        unit_w(eligible.size()), p_hspec.ridge));
    out.p = [fb, fit, clip, clip_counter](const Trajectory& tr, int t, int a) {
      const double pi = clip_probability(fit->predict(fb->history(tr, t)),
                                         clip, clip_counter.get());
      return excursion_propensity(pi, tr.elig(t), a);
    };
  }

  // q-hat: A on (history, mediator basis) among eligible rows
  {
    const HistoryFeatureSpec hs = spec.q_spec.value_or(spec.base);
    if (eligible.empty())
      throw std::runtime_error("fit_nuisance_set: no eligible rows for q-hat");
    auto fb = std::make_shared<FeatureBuilder>(ds, hs);
    auto fit = std::make_shared<LogisticFit>(
        fit_logistic(design(ds, *fb, eligible, true), labels(eligible),
                     unit_w(eligible.size()), hs.ridge));
    out.q = [fb, fit, clip, clip_counter](const Trajectory& tr, int t,
                                          double m, int a) {
      if (!tr.elig(t)) return 1.0;  // both excursions assign 0 with certainty
      const double qq = clip_probability(
          fit->predict(fb->with_mediator(tr, t, m)), clip, clip_counter.get());
      return a == 1 ? qq : 1.0 - qq;
    };
  }

  // arm strata 1(A_t = d_t^a) = 1
  std::vector<RowRef> stratum[2];
  for (const auto& r : rows) {
    const auto& tr = ds.trajectories[r.i];
    for (int a = 0; a < 2; ++a)
      if (arm_indicator(tr.elig(r.t), tr.treat(r.t), a)) stratum[a].push_back(r);
  }

  // mu-hat: Y on (history, mediator basis), per arm stratum
  const HistoryFeatureSpec mu_hspec = spec.mu_spec.value_or(spec.base);
  auto mu_fb = std::make_shared<FeatureBuilder>(ds, mu_hspec);
  std::shared_ptr<LinearFit> mu_fit[2];
  for (int a = 0; a < 2; ++a) {
    if (static_cast<int>(stratum[a].size()) < mu_fb->full_dim())
      throw std::runtime_error("fit_nuisance_set: arm stratum a=" +
                               std::to_string(a) + " too small for mu-hat");
    mu_fit[a] = std::make_shared<LinearFit>(
        fit_linear(design(ds, *mu_fb, stratum[a], true), outcomes(stratum[a]),
                   unit_w(stratum[a].size()), mu_hspec.ridge));
  }
  out.mu = [mu_fb, m0 = mu_fit[0], m1 = mu_fit[1]](const Trajectory& tr, int t,
                                                   double m, int a) {
    return (a == 1 ? m1 : m0)->predict(mu_fb->with_mediator(tr, t, m));
  };

  // eta-hat: Y on history, per arm stratum
  if (spec.eta_zero) {
    out.eta = [](const Trajectory&, int, int) { return 0.0; };
  } else {
    const HistoryFeatureSpec hs = spec.eta_spec.value_or(spec.base);
    auto fb = std::make_shared<FeatureBuilder>(ds, hs);
    std::shared_ptr<LinearFit> fitA[2];
    for (int a = 0; a < 2; ++a) {
      if (static_cast<int>(stratum[a].size()) < fb->history_dim())
        throw std::runtime_error("fit_nuisance_set: arm stratum a=" +
                                 std::to_string(a) + " too small for eta-hat");
      fitA[a] = std::make_shared<LinearFit>(
          fit_linear(design(ds, *fb, stratum[a], false), outcomes(stratum[a]),
                     unit_w(stratum[a].size()), hs.ridge));
    }
    out.eta = [fb, e0 = fitA[0], e1 = fitA[1]](const Trajectory& tr, int t,
                                               int a) {
      return (a == 1 ? e1 : e0)->predict(fb->history(tr, t));
    };
  }

  // nu-hat: pseudo-outcome mu-hat(a, H, M) regressed on history among rows
  // with 1(A_t = d_t^{1-a}) = 1
  if (spec.nu_zero) {
    out.nu = [](const Trajectory&, int, int) { return 0.0; };
  } else {
    const HistoryFeatureSpec hs = spec.nu_spec.value_or(spec.base);
    auto fb = std::make_shared<FeatureBuilder>(ds, hs);
    std::shared_ptr<LinearFit> fitA[2];
    for (int a = 0; a < 2; ++a) {
      const auto& rs = stratum[1 - a];
      if (static_cast<int>(rs.size()) < fb->history_dim())
        throw std::runtime_error("fit_nuisance_set: arm stratum a=" +
                                 std::to_string(1 - a) + " too small for nu-hat");
      Eigen::VectorXd pseudo(rs.size());
      for (std::size_t r = 0; r < rs.size(); ++r) {
        const auto& tr = ds.trajectories[rs[r].i];
        pseudo(r) = out.mu(tr, rs[r].t, tr.med(rs[r].t), a);
      }
      fitA[a] = std::make_shared<LinearFit>(fit_linear(
          design(ds, *fb, rs, false), pseudo, unit_w(rs.size()), hs.ridge));
    }
    out.nu = [fb, n0 = fitA[0], n1 = fitA[1]](const Trajectory& tr, int t,
                                              int a) {
      return (a == 1 ? n1 : n0)->predict(fb->history(tr, t));
    };
  }

  return out;
}

}  // namespace medexc
