#include "support/statref.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace emap::statref {

namespace {

double t_pdf(double x, double df) {
  const double ln = std::lgamma((df + 1.0) / 2.0) - std::lgamma(df / 2.0) -
                    0.5 * std::log(df * 3.14159265358979323846) -
                    (df + 1.0) / 2.0 * std::log1p(x * x / df);
  return std::exp(ln);
}

double chi2_pdf(double x, double df) {
  if (x <= 0.0) return 0.0;
  const double k = df / 2.0;
  const double ln = (k - 1.0) * std::log(x) - x / 2.0 - k * std::log(2.0) -
                    std::lgamma(k);
  return std::exp(ln);
}

template <typename F>
double simpson(const F& f, double a, double b, int n) {
  // n must be even
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

template <typename F>
double adaptive_integral(const F& f, double a, double b) {
  double prev = simpson(f, a, b, 64);
  for (int n = 128; n <= 1 << 20; n *= 2) {
    const double cur = simpson(f, a, b, n);
    if (std::fabs(cur - prev) < 1e-11 * (1.0 + std::fabs(cur))) return cur;
    prev = cur;
  }
  return prev;
}

}  // namespace

double t_cdf_by_integration(double t, double df) {
  if (t == 0.0) return 0.5;
  const double a = std::min(0.0, t);
  const double b = std::max(0.0, t);
  const double half = adaptive_integral([df](double x) { return t_pdf(x, df); },
                                        a, b);
  return t > 0.0 ? 0.5 + half : 0.5 - half;
}

double t_quantile_by_integration(double df, double confidence) {
  const double p = 1.0 - (1.0 - confidence) / 2.0;
  double lo = 0.0, hi = 1.0;
  while (t_cdf_by_integration(hi, df) < p) hi *= 2.0;
  for (int i = 0; i < 100; ++i) {
    const double mid = 0.5 * (lo + hi);
    (t_cdf_by_integration(mid, df) < p ? lo : hi) = mid;
    if (hi - lo < 1e-8 * (1.0 + hi)) break;
  }
  return 0.5 * (lo + hi);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("p outside (0,1)");
  // Acklam's algorithm
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1 - plow;
  double q, r;
  if (p < plow) {
    q = std::sqrt(-2 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  if (p > phigh) {
    q = std::sqrt(-2 * std::log(1 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  q = p - 0.5;
  r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
}

double chi2_critical_by_integration(std::uint32_t df, double significance) {
  const double p = 1.0 - significance;
  auto cdf = [df](double x) {
    return adaptive_integral([df](double y) { return chi2_pdf(y, df); }, 0.0, x);
  };
  double lo = 0.0, hi = 2.0 * df + 20.0;
  while (cdf(hi) < p) hi *= 2.0;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) < p ? lo : hi) = mid;
    if (hi - lo < 1e-7 * (1.0 + hi)) break;
  }
  return 0.5 * (lo + hi);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("mean of empty vector");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_stddev(const std::vector<double>& v) {
  if (v.size() < 2) throw std::invalid_argument("stddev needs >= 2 values");
  const double m = mean(v);
  double ssq = 0.0;
  for (double x : v) ssq += (x - m) * (x - m);
  return std::sqrt(ssq / static_cast<double>(v.size() - 1));
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("pearson needs equal-length vectors, n >= 2");
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0)
    throw std::invalid_argument("pearson undefined for constant input");
  return sxy / std::sqrt(sxx * syy);
}

namespace {

std::vector<double> ranks_with_ties(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(ranks_with_ties(x), ranks_with_ties(y));
}

double entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double q : p)
    if (q > 0.0) h -= q * std::log(q);
  return h;
}

}  // namespace emap::statref
