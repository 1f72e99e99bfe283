#pragma once

// Test-only oracles, kept independent of the solver paths they check.

#include <cmath>
#include <functional>
#include <vector>

#include "cohesive/common.hpp"

namespace oracles {

// Central-difference gradient of a scalar function of a flat vector.
inline std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x, double step = 1e-6) {
  std::vector<double> g(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    x[i] = xi + step;
    const double fp = f(x);
    x[i] = xi - step;
    const double fm = f(x);
    x[i] = xi;
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

inline double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

// Greatest convex minorant on a grid by exhaustive chords: for every i the
// hull value is the minimum over all j <= i <= k of the chord through
// (x_j, y_j), (x_k, y_k). O(N^3), for small grids only.
inline std::vector<double> brute_force_hull(const std::vector<double>& xs,
                                            const std::vector<double>& ys) {
  const size_t n = xs.size();
  std::vector<double> hull(ys);
  for (size_t i = 0; i < n; ++i) {
    double best = ys[i];
    for (size_t j = 0; j <= i; ++j)
      for (size_t k = i; k < n; ++k) {
        if (j == k) continue;
        const double t = (xs[i] - xs[j]) / (xs[k] - xs[j]);
        best = std::min(best, ys[j] + t * (ys[k] - ys[j]));
      }
    hull[i] = best;
  }
  return hull;
}

// Explicit competitor for the scal functional: beta descends linearly to
// 1 - sigma, alpha traverses at the bottom, beta ascends. Closed-form cost
// sigma^2 + ell s (1-sigma) sigma^{1-p}; an upper bound for g_scal(s).
inline double l_path_cost(double s, double p, double ell, double sigma) {
  return sigma * sigma + ell * s * (1.0 - sigma) * std::pow(sigma, 1.0 - p);
}

inline double best_l_path(double s, double p, double ell) {
  double best = std::min(1.0, l_path_cost(s, p, ell, 1.0));
  for (int i = 1; i < 2000; ++i) {
    const double sigma = i / 2000.0;
    best = std::min(best, l_path_cost(s, p, ell, sigma));
  }
  return best;
}

// Exact minimizer of the T-window beta-only problem for q = 2 (jump pinned
// to beta = 0 at the center): cost (1 + e^{-T/2})/(1 - e^{-T/2}).
inline double crack_window_cost_q2(double T) {
  const double e = std::exp(-0.5 * T);
  return (1.0 + e) / (1.0 - e);
}

}  // namespace oracles
