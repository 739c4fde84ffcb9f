// Small numeric helpers: order-stable summation, mean/standard-error, and
// the two-sample Kolmogorov-Smirnov statistic.
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace ddlab {

// Pairwise summation: reproducible and accurate regardless of how the values
// were produced (results depend only on index order).
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

struct MeanSe {
  double mean = 0.0;
  double std_error = 0.0;
  long n = 0;
};

inline MeanSe mean_and_se(std::span<const double> v) {
  if (v.empty()) throw std::domain_error("mean_and_se: empty sample");
  MeanSe r;
  r.n = static_cast<long>(v.size());
  r.mean = pairwise_sum(v) / static_cast<double>(v.size());
  if (v.size() < 2) return r;
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double d = v[i] - r.mean;
    sq[i] = d * d;
  }
  const double var = pairwise_sum(sq) / static_cast<double>(v.size() - 1);
  r.std_error = std::sqrt(var / static_cast<double>(v.size()));
  return r;
}

// Two-sample KS statistic; inputs need not be sorted.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::domain_error("ks_statistic: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  double d = 0.0;
  std::size_t ia = 0, ib = 0;
  while (ia < a.size() && ib < b.size()) {
    const double x = std::min(a[ia], b[ib]);
    while (ia < a.size() && a[ia] <= x) ++ia;
    while (ib < b.size() && b[ib] <= x) ++ib;
    d = std::max(d, std::abs(static_cast<double>(ia) / na - static_cast<double>(ib) / nb));
  }
  return d;
}

}  // namespace ddlab
