#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace gffx {

/// Standard normal density.
inline double normal_pdf(double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi); }

/// P(N(0,1) > t), accurate in the far tail.
inline double normal_tail(double t) { return 0.5 * std::erfc(t / std::numbers::sqrt2); }

inline double normal_cdf(double t) { return 0.5 * std::erfc(-t / std::numbers::sqrt2); }

/// Mergeable running mean / variance (Chan et al. pairwise update).
class Welford {
 public:
  void add(double x) {
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
  }

  void merge(const Welford& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
      *this = o;
      return;
    }
    const double n = static_cast<double>(n_ + o.n_);
    const double delta = o.mean_ - mean_;
    mean_ += delta * static_cast<double>(o.n_) / n;
    m2_ += o.m2_ + delta * delta * static_cast<double>(n_) * static_cast<double>(o.n_) / n;
    n_ += o.n_;
  }

  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double standard_error() const { return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0; }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct Interval {
  double low;
  double high;
  double radius() const { return 0.5 * (high - low); }
  bool contains(double x) const { return low <= x && x <= high; }
};

/// z-quantile of the two-sided 99% normal interval.
inline constexpr double kZ99 = 2.5758293035489004;

/// Wilson score interval for a binomial proportion.
inline Interval wilson_interval(std::size_t successes, std::size_t trials, double z = kZ99) {
  if (trials == 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

/// Two-sided Kolmogorov-Smirnov statistic sup_x |F_n(x) - F(x)| with the
/// right-continuous empirical CDF.
inline double ks_distance(std::span<const double> samples, const std::function<double(double)>& cdf) {
  if (samples.size() < 2) throw std::invalid_argument("KS distance needs at least 2 samples");
  std::vector<double> sorted(samples.begin(), samples.end());
  for (double x : sorted)
    if (std::isnan(x)) throw std::invalid_argument("KS distance: NaN sample");
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double f = cdf(sorted[i]);
    d = std::max({d, std::abs(static_cast<double>(j) / n - f), std::abs(f - static_cast<double>(i) / n)});
    i = j;
  }
  return d;
}

/// Two-sample KS statistic.
inline double ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("two-sample KS needs non-empty samples");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double na = static_cast<double>(x.size()), nb = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

/// Asymptotic Kolmogorov distribution: P(sqrt(n) D_n > x).
inline double kolmogorov_survival(double x) {
  if (x <= 0) return 1.0;
  if (x < 0.2) return 1.0;
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    s += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

/// Critical value c(alpha) with P(sqrt(n) D_n > c) = alpha, by bisection.
inline double kolmogorov_critical(double alpha) {
  double lo = 0.2, hi = 5.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (kolmogorov_survival(mid) > alpha ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace gffx
