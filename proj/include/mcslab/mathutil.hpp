#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "mcslab/errors.hpp"

namespace mcslab {

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

// log(1 + e^x) without overflow
inline double log1pexp(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// Pool-adjacent-violators, non-decreasing fit (equal weights).
inline std::vector<double> isotonic_non_decreasing(const std::vector<double>& y) {
  std::vector<double> level;
  std::vector<std::size_t> count;
  level.reserve(y.size());
  count.reserve(y.size());
  for (double v : y) {
    level.push_back(v);
    count.push_back(1);
    while (level.size() > 1 && level[level.size() - 2] > level.back()) {
      const double merged = (level[level.size() - 2] * count[count.size() - 2] +
                             level.back() * count.back()) /
                            (count[count.size() - 2] + count.back());
      count[count.size() - 2] += count.back();
      level[level.size() - 2] = merged;
      level.pop_back();
      count.pop_back();
    }
  }
  std::vector<double> out;
  out.reserve(y.size());
  for (std::size_t b = 0; b < level.size(); ++b)
    out.insert(out.end(), count[b], level[b]);
  return out;
}

inline std::vector<double> isotonic_non_increasing(const std::vector<double>& y) {
  std::vector<double> neg(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) neg[i] = -y[i];
  auto fit = isotonic_non_decreasing(neg);
  for (double& v : fit) v = -v;
  return fit;
}

// Piecewise-linear interpolation on ascending xs; clamps outside the grid.
inline double interp_clamped(const std::vector<double>& xs,
                             const std::vector<double>& ys, double x) {
  if (xs.empty() || xs.size() != ys.size())
    throw StateError("interp_clamped: empty or mismatched table");
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const std::size_t i = static_cast<std::size_t>(it - xs.begin());
  const double t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
  return ys[i - 1] + t * (ys[i] - ys[i - 1]);
}

}  // namespace mcslab
