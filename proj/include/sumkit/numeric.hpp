#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "sumkit/error.hpp"

namespace sumkit {

struct MeanStd {
  double mean = 0.0;
  double std_dev = 0.0;  // population standard deviation
  std::size_t n = 0;
};

inline MeanStd mean_std(std::span<const double> xs) {
  MeanStd out;
  out.n = xs.size();
  if (xs.empty()) return out;
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) {
    const double d = x - out.mean;
    ss += d * d;
  }
  out.std_dev = std::sqrt(ss / static_cast<double>(xs.size()));
  return out;
}

inline double median(std::vector<double> xs) {
  if (xs.empty()) throw error("median of empty sequence");
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  if (n % 2 == 1) return xs[n / 2];
  return 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

namespace detail {

inline double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

/// Continued fraction for the incomplete beta function (modified Lentz).
inline double beta_cont_frac(double a, double b, double x) {
  constexpr int max_iter = 400;
  constexpr double eps = 3e-14;
  constexpr double fpmin = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_iter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) break;
  }
  return h;
}

}  // namespace detail

/// Regularized incomplete beta function I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double bt =
      std::exp(a * std::log(x) + b * std::log1p(-x) - detail::log_beta(a, b));
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return bt * detail::beta_cont_frac(a, b, x) / a;
  }
  return 1.0 - bt * detail::beta_cont_frac(b, a, 1.0 - x) / b;
}

/// Two-sided p-value for a t statistic with `dof` degrees of freedom.
inline double student_t_two_sided_p(double t, double dof) {
  if (dof <= 0.0) throw error("t test requires positive degrees of freedom");
  if (!std::isfinite(t)) return 0.0;
  return incomplete_beta(dof / 2.0, 0.5, dof / (dof + t * t));
}

struct PearsonResult {
  double r = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

/// Pearson correlation with a two-sided p-value from the exact t
/// distribution.  Requires at least 3 points and non-degenerate variance on
/// both sides.
inline PearsonResult pearson(std::span<const double> x,
                             std::span<const double> y) {
  if (x.size() != y.size()) throw error("pearson: length mismatch");
  if (x.size() < 3) throw error("pearson: need at least 3 points");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw error("pearson: zero variance");
  PearsonResult out;
  out.n = x.size();
  out.r = sxy / std::sqrt(sxx * syy);
  out.r = std::clamp(out.r, -1.0, 1.0);
  const double dof = n - 2.0;
  if (std::fabs(out.r) >= 1.0) {
    out.p_value = 0.0;
  } else {
    const double t = out.r * std::sqrt(dof / (1.0 - out.r * out.r));
    out.p_value = student_t_two_sided_p(t, dof);
  }
  return out;
}

/// Numerically stable softmax.
inline std::vector<double> softmax(std::span<const double> xs) {
  if (xs.empty()) throw error("softmax of empty sequence");
  const double m = *std::max_element(xs.begin(), xs.end());
  std::vector<double> out(xs.size());
  double z = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out[i] = std::exp(xs[i] - m);
    z += out[i];
  }
  for (double& v : out) v /= z;
  return out;
}

/// KL(p || q) in nats.  Terms with p_i == 0 contribute zero; q_i == 0 with
/// p_i > 0 is an error (infinite divergence).
inline double kl_divergence(std::span<const double> p,
                            std::span<const double> q) {
  if (p.size() != q.size()) throw error("kl_divergence: length mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] <= 0.0) throw error("kl_divergence: q has zero mass where p > 0");
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return kl;
}

}  // namespace sumkit
