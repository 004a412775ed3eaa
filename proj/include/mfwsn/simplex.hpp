#pragma once

#include <cmath>
#include <random>
#include <span>
#include <vector>

namespace mfwsn {

// Uniform sample from the n-simplex (normalized exponential spacings).
inline std::vector<double> random_simplex_point(std::size_t n, std::mt19937_64& rng) {
  std::vector<double> x(n);
  double sum = 0.0;
  for (auto& v : x) {
    const double u = (rng() >> 11) * 0x1.0p-53;
    v = -std::log1p(-u);
    sum += v;
  }
  for (auto& v : x) v /= sum;
  return x;
}

// max(|sum - 1|, -min entry): 0 for points exactly on the simplex.
inline double simplex_defect(std::span<const double> x) {
  double sum = 0.0, lowest = 0.0;
  for (double v : x) {
    sum += v;
    lowest = std::min(lowest, v);
  }
  return std::max(std::abs(sum - 1.0), -lowest);
}

// Clips tiny negative entries to 0 and renormalizes the sum to 1.
inline void clip_to_simplex(std::vector<double>& x) {
  double sum = 0.0;
  for (auto& v : x) {
    if (v < 0.0) v = 0.0;
    sum += v;
  }
  if (sum > 0.0)
    for (auto& v : x) v /= sum;
}

inline double linf_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, std::abs(a[k] - b[k]));
  return d;
}

}  // namespace mfwsn
