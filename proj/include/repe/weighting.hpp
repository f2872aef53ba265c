#pragma once

// Layer-wise regression of the jealousy projection on purified factor projections:
//   z(s_jea) ~ b0 + b_sup z(s_sup) + b_rel z(s_rel) + b_wk z(s_wk)

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "repe/actstore.hpp"
#include "repe/bundle.hpp"
#include "repe/common.hpp"
#include "repe/stats.hpp"

namespace repe {

struct ScoreTable {
  std::size_t layer = 0;
  std::vector<std::string> ids;
  std::vector<double> jea, sup, rel, wk;
  std::vector<int> ground_truth; // 0 where a record has none
  bool standardized = false;

  std::size_t size() const { return jea.size(); }

  std::vector<double>& column(Factor f) {
    switch (f) {
    case Factor::superiority: return sup;
    case Factor::relevance: return rel;
    case Factor::weekday: return wk;
    case Factor::jealousy: return jea;
    }
    return jea;
  }
  const std::vector<double>& column(Factor f) const { return const_cast<ScoreTable*>(this)->column(f); }
};

/// s_jea = h . v_jea (raw jealousy direction); s_t = h . z_t (purified).
inline ScoreTable project_scores(const LayerSlice& slice, const BundleEntry& jealousy,
                                 const std::map<Factor, const BundleEntry*>& purified) {
  auto check = [&](const BundleEntry& e) {
    if (e.layer != slice.layer)
      throw Error(ErrorKind::invalid_argument, "project_scores: " + std::string(factor_name(e.factor)) + " vector is for layer " +
                                                   std::to_string(e.layer) + ", slice is layer " + std::to_string(slice.layer));
    if (e.direction.size() != slice.values.cols()) throw Error(ErrorKind::invalid_argument, "project_scores: dimension mismatch");
  };
  check(jealousy);
  ScoreTable t;
  t.layer = slice.layer;
  const Vec sj = slice.values * jealousy.direction;
  t.jea.assign(sj.begin(), sj.end());
  for (Factor f : antecedent_factors) {
    auto it = purified.find(f);
    if (it == purified.end() || !it->second)
      throw Error(ErrorKind::missing_input, "project_scores: no purified " + std::string(factor_name(f)) + " vector");
    check(*it->second);
    const Vec s = slice.values * it->second->direction;
    t.column(f).assign(s.begin(), s.end());
  }
  for (const auto& r : slice.records) {
    t.ids.push_back(r.record_id);
    t.ground_truth.push_back(r.ground_truth.value_or(0));
  }
  return t;
}

inline ScoreTable standardize(const ScoreTable& t) {
  ScoreTable z = t;
  for (Factor f : all_factors) {
    try {
      z.column(f) = stats::zscore<double>(t.column(f));
    } catch (const Error& e) {
      throw Error(ErrorKind::degenerate, "s_" + std::string(factor_name(f)) + ": " + e.what());
    }
  }
  z.standardized = true;
  return z;
}

/// Plain OLS with standard errors; X must already contain the intercept column.
struct LeastSquares {
  Vec beta, se, t, p;
  double rss = 0, tss = 0, r2 = 0;
  std::size_t dof = 0;
};

inline LeastSquares least_squares(const Mat& x, const Vec& y) {
  const auto n = x.rows(), k = x.cols();
  if (n <= k) throw Error(ErrorKind::invalid_argument, "least_squares: need more observations than parameters");
  const Mat xtx = x.transpose() * x;
  Eigen::SelfAdjointEigenSolver<Mat> eig(xtx);
  const auto& ev = eig.eigenvalues();
  if (!(ev.minCoeff() > 1e-10 * ev.maxCoeff())) throw Error(ErrorKind::rank, "least_squares: design matrix is rank deficient");
  const Mat inv = eig.eigenvectors() * ev.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  LeastSquares r;
  r.beta = xtx.ldlt().solve(x.transpose() * y);
  const Vec resid = y - x * r.beta;
  r.rss = resid.squaredNorm();
  r.tss = (y.array() - y.mean()).matrix().squaredNorm();
  r.r2 = r.tss > 0 ? std::clamp(1.0 - r.rss / r.tss, 0.0, 1.0) : 0.0;
  r.dof = static_cast<std::size_t>(n - k);
  const double sigma2 = r.rss / static_cast<double>(r.dof);
  r.se.resize(k);
  r.t.resize(k);
  r.p.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    r.se[j] = std::sqrt(std::max(0.0, sigma2 * inv(j, j)));
    if (r.se[j] > 0) {
      r.t[j] = r.beta[j] / r.se[j];
      r.p[j] = stats::student_t_two_sided_p(r.t[j], static_cast<double>(r.dof));
    } else {
      // Exact fit: a nonzero coefficient is infinitely significant.
      r.t[j] = r.beta[j] == 0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), r.beta[j]);
      r.p[j] = r.beta[j] == 0 ? 1.0 : 0.0;
    }
  }
  return r;
}

struct ValidityFlags {
  bool antecedent_ok = false;
  bool placebo_ok = false;
  bool overall = false;
};

struct RegressionReport {
  std::size_t layer = 0;
  std::map<Factor, double> beta;    // sup, rel, wk
  std::map<Factor, double> p_value; // sup, rel, wk
  double intercept = 0;
  double r2 = 0;
  double pearson_r = std::numeric_limits<double>::quiet_NaN();
  std::size_t n = 0;
  ValidityFlags flags;
  std::optional<std::string> error; // set when the layer could not be fit
};

struct ValidityThresholds {
  double significance = 0.05;
  double placebo_beta = 0.05;
};

inline ValidityFlags validity_check(const RegressionReport& r, const ValidityThresholds& th = {}) {
  ValidityFlags f;
  if (r.error) return f;
  auto ok = [&](Factor x) { return r.beta.at(x) > 0 && r.p_value.at(x) < th.significance; };
  f.antecedent_ok = ok(Factor::superiority) && ok(Factor::relevance);
  f.placebo_ok = std::abs(r.beta.at(Factor::weekday)) <= th.placebo_beta;
  f.overall = f.antecedent_ok && f.placebo_ok;
  return f;
}

/// Fits the standardized table. Exactly collinear predictor pairs are reported by name.
inline RegressionReport ols_fit(const ScoreTable& table, const ValidityThresholds& th = {}) {
  if (!table.standardized) throw Error(ErrorKind::invalid_argument, "ols_fit expects a standardized score table");
  const std::size_t n = table.size();
  if (n <= antecedent_factors.size() + 1)
    throw Error(ErrorKind::invalid_argument, "ols_fit: n=" + std::to_string(n) + " is too small for 3 predictors and an intercept");
  for (std::size_t a = 0; a < antecedent_factors.size(); ++a)
    for (std::size_t b = a + 1; b < antecedent_factors.size(); ++b) {
      const auto fa = antecedent_factors[a], fb = antecedent_factors[b];
      double r = 0;
      try {
        r = stats::pearson<double>(table.column(fa), table.column(fb));
      } catch (const Error&) {
        continue; // constant columns are caught by the rank test below
      }
      if (std::abs(r) >= 1.0 - 1e-9)
        throw Error(ErrorKind::rank, "collinear predictors: " + std::string(factor_name(fa)) + " and " + std::string(factor_name(fb)));
    }
  Mat x(static_cast<Eigen::Index>(n), 4);
  Vec y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    x(r, 0) = 1.0;
    x(r, 1) = table.sup[i];
    x(r, 2) = table.rel[i];
    x(r, 3) = table.wk[i];
    y[r] = table.jea[i];
  }
  const auto ls = least_squares(x, y);
  RegressionReport rep;
  rep.layer = table.layer;
  rep.n = n;
  rep.intercept = ls.beta[0];
  for (std::size_t j = 0; j < 3; ++j) {
    rep.beta[antecedent_factors[j]] = ls.beta[static_cast<Eigen::Index>(j + 1)];
    rep.p_value[antecedent_factors[j]] = ls.p[static_cast<Eigen::Index>(j + 1)];
  }
  rep.r2 = ls.r2;
  std::vector<double> gt(table.ground_truth.begin(), table.ground_truth.end());
  try {
    rep.pearson_r = stats::pearson<double>(table.jea, gt);
  } catch (const Error&) {
  }
  rep.flags = validity_check(rep, th);
  return rep;
}

/// One report per requested layer; a failing layer carries its error and the sweep continues.
inline std::vector<RegressionReport> layer_sweep(const ActivationSet& g1, const VectorBundle& raw, const VectorBundle& purified,
                                                 std::span<const std::size_t> layers, const ValidityThresholds& th = {}) {
  std::vector<RegressionReport> out;
  for (std::size_t layer : layers) {
    try {
      const auto slice = select_layer(g1, layer);
      std::map<Factor, const BundleEntry*> z;
      for (Factor f : antecedent_factors) z[f] = &purified.at(f, layer);
      out.push_back(ols_fit(standardize(project_scores(slice, raw.at(Factor::jealousy, layer), z)), th));
    } catch (const Error& e) {
      RegressionReport r;
      r.layer = layer;
      r.n = g1.size();
      r.error = std::string(error_kind_name(e.kind())) + ": " + e.what();
      out.push_back(std::move(r));
    }
  }
  return out;
}

} // namespace repe
