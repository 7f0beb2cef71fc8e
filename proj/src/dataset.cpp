#include "medexc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace medexc {

ValidationReport validate_dataset(const Dataset& ds) {
  ValidationReport report;
  auto add = [&](const std::string& id, int t, const std::string& msg) {
    report.violations.push_back({id, t, msg});
  };
  if (ds.n() < 2) add("", 0, "dataset must contain at least 2 participants");
  const int d = ds.xdim();
  for (const auto& tr : ds.trajectories) {
    if (tr.T() != ds.T) {
      add(tr.id, 0, "common-T breach: trajectory length " +
                        std::to_string(tr.T()) + " != " + std::to_string(ds.T));
      continue;
    }
    if (tr.x.rows() != tr.T() || tr.i.size() != tr.T() ||
        tr.a.size() != tr.T()) {
      add(tr.id, 0, "inconsistent field lengths");
      continue;
    }
    if (tr.xdim() != d) add(tr.id, 0, "covariate dimension mismatch");
    if (!std::isfinite(tr.y)) add(tr.id, 0, "non-finite distal outcome");
    for (int t = 1; t <= tr.T(); ++t) {
      const int it = tr.elig(t), at = tr.treat(t);
      if (it != 0 && it != 1)
        add(tr.id, t, "eligibility not in {0,1}");
      if (at != 0 && at != 1)
        add(tr.id, t, "treatment not in {0,1}");
      if (it == 0 && at == 1)
        add(tr.id, t, "ineligible treated at t=" + std::to_string(t));
      if (!std::isfinite(tr.med(t)))
        add(tr.id, t, "non-finite mediator");
      for (int j = 0; j < tr.xdim(); ++j)
        if (!std::isfinite(tr.x(t - 1, j))) {
          add(tr.id, t, "non-finite covariate");
          break;
        }
    }
  }
  return report;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    if (!field.empty() && field.back() == '\r') field.pop_back();
    out.push_back(field);
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_num(const std::string& s, const std::string& what, int lineno) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing chars");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("csv line " + std::to_string(lineno) +
                             ": non-numeric " + what + " '" + s + "'");
  }
}

}  // namespace

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty file " + path);
  auto header = split_csv_line(line);
  const std::vector<std::string> fixed = {"id", "t", "I", "A", "M", "Y"};
  if (header.size() < fixed.size())
    throw std::runtime_error("malformed header in " + path);
  for (std::size_t j = 0; j < fixed.size(); ++j)
    if (header[j] != fixed[j])
      throw std::runtime_error("malformed header: expected column " +
                               fixed[j] + ", got " + header[j]);
  const int d = static_cast<int>(header.size() - fixed.size());
  for (int j = 0; j < d; ++j)
    if (header[fixed.size() + j] != "X" + std::to_string(j + 1))
      throw std::runtime_error("malformed header: expected X" +
                               std::to_string(j + 1));

  struct Row {
    int t;
    int i, a;
    double m, y;
    Eigen::VectorXd x;
  };
  std::map<std::string, std::vector<Row>> by_id;
  std::vector<std::string> id_order;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto f = split_csv_line(line);
    if (f.size() != header.size())
      throw std::runtime_error("csv line " + std::to_string(lineno) +
                               ": wrong field count");
    Row r;
    r.t = static_cast<int>(parse_num(f[1], "t", lineno));
    r.i = static_cast<int>(parse_num(f[2], "I", lineno));
    r.a = static_cast<int>(parse_num(f[3], "A", lineno));
    r.m = parse_num(f[4], "M", lineno);
    r.y = parse_num(f[5], "Y", lineno);
    r.x.resize(d);
    for (int j = 0; j < d; ++j) r.x(j) = parse_num(f[6 + j], "X", lineno);
    if (by_id.find(f[0]) == by_id.end()) id_order.push_back(f[0]);
    by_id[f[0]].push_back(std::move(r));
  }
  if (by_id.empty()) throw std::runtime_error("no data rows in " + path);

  int T = 0;
  for (const auto& [id, rows] : by_id)
    T = std::max(T, static_cast<int>(rows.size()));

  Dataset ds;
  ds.T = T;
  for (const auto& id : id_order) {
    const auto& rows = by_id[id];
    Trajectory tr;
    tr.id = id;
    tr.x.resize(T, d);
    tr.i.resize(T);
    tr.a.resize(T);
    tr.m.resize(T);
    std::vector<bool> seen(T, false);
    bool have_y = false;
    for (const auto& r : rows) {
      if (r.t < 1 || r.t > T || seen[r.t - 1])
        throw std::runtime_error("participant " + id + ": duplicate or out-of-range t=" +
                                 std::to_string(r.t));
      seen[r.t - 1] = true;
      tr.i(r.t - 1) = r.i;
      tr.a(r.t - 1) = r.a;
      tr.m(r.t - 1) = r.m;
      tr.x.row(r.t - 1) = r.x.transpose();
      if (have_y && tr.y != r.y)
        throw std::runtime_error("participant " + id +
                                 ": inconsistent distal outcome");
      tr.y = r.y;
      have_y = true;
    }
    for (int t = 1; t <= T; ++t)
      if (!seen[t - 1])
        throw std::runtime_error("participant " + id + ": missing time point t=" +
                                 std::to_string(t));
    ds.trajectories.push_back(std::move(tr));
  }
  return ds;
}

void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  const int d = ds.xdim();
  out << "id,t,I,A,M,Y";
  for (int j = 1; j <= d; ++j) out << ",X" << j;
  out << "\n";
  char buf[32];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (const auto& tr : ds.trajectories) {
    for (int t = 1; t <= ds.T; ++t) {
      out << tr.id << ',' << t << ',' << tr.elig(t) << ',' << tr.treat(t)
          << ',' << num(tr.med(t)) << ',' << num(tr.y);
      for (int j = 0; j < d; ++j) out << ',' << num(tr.x(t - 1, j));
      out << "\n";
    }
  }
}

FeatureMap FeatureMap::constant() { return FeatureMap(Kind::Constant, 1); }

FeatureMap FeatureMap::linear_in_t() { return FeatureMap(Kind::LinearInT, 2); }

FeatureMap FeatureMap::polynomial(int degree) {
  if (degree < 1) throw std::invalid_argument("polynomial degree must be >= 1");
  FeatureMap fm(Kind::Polynomial, degree + 1);
  fm.degree_ = degree;
  return fm;
}

FeatureMap FeatureMap::bspline(int df, int T) {
  if (T < 2) throw std::invalid_argument("bspline feature map needs T >= 2");
  FeatureMap fm(Kind::BSpline, df);
  fm.basis_.push_back(BSplineBasis::equally_spaced(1.0, static_cast<double>(T), df));
  return fm;
}

FeatureMap FeatureMap::parse(const std::string& text, int T) {
  if (text == "constant") return constant();
  if (text == "linear") return linear_in_t();
  if (text.rfind("poly:", 0) == 0) return polynomial(std::stoi(text.substr(5)));
  if (text.rfind("bspline:", 0) == 0)
    return bspline(std::stoi(text.substr(8)), T);
  throw std::invalid_argument("unknown feature map '" + text + "'");
}

std::string FeatureMap::describe() const {
  switch (kind_) {
    case Kind::Constant: return "constant";
    case Kind::LinearInT: return "linear";
    case Kind::Polynomial: return "poly:" + std::to_string(degree_);
    case Kind::BSpline: return "bspline:" + std::to_string(dim_);
  }
  return "?";
}

Eigen::VectorXd FeatureMap::evaluate(int t) const {
  switch (kind_) {
    case Kind::Constant:
      return Eigen::VectorXd::Ones(1);
    case Kind::LinearInT: {
      Eigen::VectorXd f(2);
      f << 1.0, static_cast<double>(t - 1);
      return f;
    }
    case Kind::Polynomial: {
      Eigen::VectorXd f(dim_);
      f(0) = 1.0;
      for (int k = 1; k <= degree_; ++k) f(k) = f(k - 1) * (t - 1);
      return f;
    }
    case Kind::BSpline:
      return basis_.front().evaluate(static_cast<double>(t));
  }
  throw std::logic_error("unreachable");
}

WeightVector make_uniform_weights(int T) {
  if (T < 1) throw std::invalid_argument("T must be positive");
  WeightVector wv;
  wv.w = Eigen::VectorXd::Constant(T, 1.0 / T);
  return wv;
}

WeightVector make_pointmass_weights(int t0, int T) {
  if (t0 < 1 || t0 > T)
    throw std::invalid_argument("point-mass index outside 1..T");
  WeightVector wv;
  wv.w = Eigen::VectorXd::Zero(T);
  wv.w(t0 - 1) = 1.0;
  return wv;
}

WeightVector make_custom_weights(const Eigen::VectorXd& raw) {
  if (raw.size() < 1) throw std::invalid_argument("empty weight vector");
  if ((raw.array() < 0.0).any())
    throw std::invalid_argument("weights must be nonnegative");
  const double s = raw.sum();
  if (s <= 0.0) throw std::invalid_argument("all-zero weight vector");
  WeightVector wv;
  wv.w = raw / s;
  return wv;
}

WeightVector parse_weights(const std::string& text, int T) {
  if (text == "uniform") return make_uniform_weights(T);
  if (text.rfind("point:", 0) == 0)
    return make_pointmass_weights(std::stoi(text.substr(6)), T);
  if (text.rfind("custom:", 0) == 0) {
    std::vector<double> vals;
    std::stringstream ss(text.substr(7));
    std::string tok;
    while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
    if (static_cast<int>(vals.size()) != T)
      throw std::invalid_argument("custom weights must have length T");
    Eigen::VectorXd raw =
        Eigen::Map<Eigen::VectorXd>(vals.data(), vals.size());
    return make_custom_weights(raw);
  }
  throw std::invalid_argument("unknown weight spec '" + text + "'");
}

}  // namespace medexc
