#pragma once

#include <cmath>
#include <limits>
#include <span>

#include <json.hpp>

#include "newsalpha/bench/stats.hpp"
#include "newsalpha/core/error.hpp"

namespace newsalpha {

namespace detail {

// Continued fraction for the incomplete beta (modified Lentz).
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw PreconditionError("incomplete beta did not converge");
}

}  // namespace detail

// Regularised incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw PreconditionError("incomplete_beta needs a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  // The fraction converges fast for x < (a+1)/(a+b+2); use symmetry otherwise.
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

// P(|T| >= |t|) for Student's t with `df` degrees of freedom.
inline double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw PreconditionError("df must be positive");
  if (std::isinf(t)) return 0.0;
  return incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

struct PairedTestResult {
  double t_stat = 0.0;
  int df = 0;
  double p_value = 1.0;
  double mean_diff = 0.0;
  std::size_t n = 0;
};

// Two-sided paired t-test on a - b (aligned by seed).
inline PairedTestResult paired_t(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw LengthMismatch("paired_t: unequal lengths");
  if (a.size() < 2) throw PreconditionError("paired_t needs n >= 2");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const double sd = sample_std(d);
  if (sd == 0.0) throw DegenerateDiffs("all paired differences are equal");
  PairedTestResult r;
  r.n = d.size();
  r.df = int(d.size()) - 1;
  r.mean_diff = sample_mean(d);
  r.t_stat = r.mean_diff / (sd / std::sqrt(double(d.size())));
  r.p_value = student_t_two_sided_p(r.t_stat, r.df);
  return r;
}

inline nlohmann::ordered_json to_json(const PairedTestResult& r) {
  return {{"t_stat", r.t_stat}, {"df", r.df}, {"p_value", r.p_value}, {"mean_diff", r.mean_diff},
          {"n", r.n}};
}

}  // namespace newsalpha
