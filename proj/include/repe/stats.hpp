#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "repe/common.hpp"

namespace repe::stats {

namespace detail {

// Continued fraction for the incomplete beta function (modified Lentz).
template <typename T> T beta_continued_fraction(T a, T b, T x) {
  constexpr int max_iter = 10000;
  constexpr T eps = std::numeric_limits<T>::epsilon();
  constexpr T tiny = std::numeric_limits<T>::min() / eps;
  const T qab = a + b, qap = a + 1, qam = a - 1;
  T c = 1, d = 1 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1 / d;
  T h = d;
  for (int m = 1; m <= max_iter; ++m) {
    const T m2 = 2 * m;
    T aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1 / d;
    const T del = d * c;
    h *= del;
    if (std::abs(del - 1) <= eps) return h;
  }
  return h;
}

} // namespace detail

/// Regularized incomplete beta I_x(a, b).
template <typename T> T incomplete_beta(T a, T b, T x) {
  if (!(a > 0) || !(b > 0)) throw Error(ErrorKind::invalid_argument, "incomplete_beta: a and b must be positive");
  if (x <= 0) return 0;
  if (x >= 1) return 1;
  const T log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const T front = std::exp(log_front);
  if (x < (a + 1) / (a + b + 2)) return front * detail::beta_continued_fraction(a, b, x) / a;
  return 1 - front * detail::beta_continued_fraction(b, a, 1 - x) / b;
}

/// P(|T| >= |t|) for Student's t with `dof` degrees of freedom.
template <typename T> T student_t_two_sided_p(T t, T dof) {
  if (!(dof > 0)) throw Error(ErrorKind::invalid_argument, "student_t: degrees of freedom must be positive");
  if (std::isnan(t)) return std::numeric_limits<T>::quiet_NaN();
  if (std::isinf(t)) return 0;
  return incomplete_beta(dof / 2, T(0.5), dof / (dof + t * t));
}

template <typename T> T student_t_cdf(T t, T dof) {
  const T tail = student_t_two_sided_p(t, dof) / 2;
  return t >= 0 ? 1 - tail : tail;
}

template <typename T> T mean(std::span<const T> x) {
  T s = 0;
  for (T v : x) s += v;
  return s / static_cast<T>(x.size());
}

/// Sample standard deviation (n - 1 denominator).
template <typename T> T sample_std(std::span<const T> x) {
  if (x.size() < 2) return 0;
  const T m = mean(x);
  T ss = 0;
  for (T v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<T>(x.size() - 1));
}

inline constexpr double min_std = 1e-12;

template <typename T> std::vector<T> zscore(std::span<const T> x) {
  const T sd = sample_std(x);
  if (!(sd > min_std)) throw Error(ErrorKind::degenerate, "zscore: column has zero variance");
  const T m = mean(x);
  std::vector<T> out;
  out.reserve(x.size());
  for (T v : x) out.push_back((v - m) / sd);
  return out;
}

template <typename T> T pearson(std::span<const T> x, std::span<const T> y) {
  if (x.size() != y.size()) throw Error(ErrorKind::invalid_argument, "pearson: length mismatch");
  if (x.size() < 3) throw Error(ErrorKind::invalid_argument, "pearson: need at least 3 observations");
  const T sx = sample_std(x), sy = sample_std(y);
  if (!(sx > min_std) || !(sy > min_std)) throw Error(ErrorKind::degenerate, "pearson: constant input");
  const T mx = mean(x), my = mean(y);
  T sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sxy += (x[i] - mx) * (y[i] - my);
  const T r = sxy / static_cast<T>(x.size() - 1) / (sx * sy);
  return std::clamp(r, T(-1), T(1));
}

} // namespace repe::stats
