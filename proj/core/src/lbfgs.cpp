#include "cohesive/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "cohesive/common.hpp"

namespace cohesive {

namespace {

void project(std::vector<double>& x, const std::vector<double>& lo,
             const std::vector<double>& hi) {
  for (size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);
}

double projected_grad_norm(const std::vector<double>& x, const std::vector<double>& g,
                           const std::vector<double>& lo, const std::vector<double>& hi) {
  double norm = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    double gi = g[i];
    if (x[i] <= lo[i] && gi > 0.0) gi = 0.0;
    if (x[i] >= hi[i] && gi < 0.0) gi = 0.0;
    norm = std::max(norm, std::abs(gi));
  }
  return norm;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

LbfgsResult BoxLbfgs::minimize(const Objective& f, std::vector<double>& x,
                               const std::vector<double>& lo, const std::vector<double>& hi,
                               std::vector<double>* energy_history,
                               const DiagHessian* precond) const {
  const size_t n = x.size();
  require(lo.size() == n && hi.size() == n, "BoxLbfgs: bounds size mismatch");
  project(x, lo, hi);

  std::vector<double> g(n), x_trial(n), g_trial(n), d(n), hdiag;
  std::vector<double> inv_diag;
  auto refresh_precond = [&]() {
    if (!precond) return;
    hdiag.assign(n, 0.0);
    (*precond)(x, hdiag);
    double dmax = 0.0;
    for (double v : hdiag) dmax = std::max(dmax, v);
    if (dmax <= 0.0) {
      inv_diag.assign(n, 1.0);
      return;
    }
    const double floor = 1e-10 * dmax;
    inv_diag.resize(n);
    for (size_t i = 0; i < n; ++i) inv_diag[i] = 1.0 / std::max(hdiag[i], floor);
  };
  std::deque<std::pair<std::vector<double>, std::vector<double>>> mem;  // (s, y)
  std::deque<double> rho;

  double fx = f(x, g);
  if (!std::isfinite(fx)) throw DivergenceError("BoxLbfgs: non-finite initial energy");
  if (energy_history) energy_history->push_back(fx);

  LbfgsResult res;
  res.value = fx;
  double gamma = 1.0;
  // Stall window: stop once the decrease over the last 25 iterations is
  // negligible relative to the current value.
  constexpr int kStallWindow = 25;
  std::vector<double> recent;
  recent.reserve(kStallWindow + 1);

  for (int iter = 0; iter < opts_.max_iters; ++iter) {
    res.kkt_residual = projected_grad_norm(x, g, lo, hi);
    bool small_grad;
    if (precond) {
      // Convergence in the diagonally scaled metric: the Newton-like step per
      // coordinate must drop below tolerance.
      refresh_precond();
      double pgn = 0.0;
      for (size_t i = 0; i < n; ++i) {
        double gi = g[i];
        if (x[i] <= lo[i] && gi > 0.0) gi = 0.0;
        if (x[i] >= hi[i] && gi < 0.0) gi = 0.0;
        pgn = std::max(pgn, std::abs(gi) * inv_diag[i]);
      }
      small_grad = pgn <= opts_.grad_tol;
    } else {
      small_grad = res.kkt_residual <= opts_.grad_tol;
    }
    if (small_grad) {
      res.converged = true;
      break;
    }
    if (opts_.f_tol > 0.0) {
      recent.push_back(fx);
      if (static_cast<int>(recent.size()) > kStallWindow) {
        const double past = recent[recent.size() - kStallWindow - 1];
        if (past - fx <= opts_.f_tol * std::max(1.0, std::abs(fx))) {
          res.converged = true;
          break;
        }
      }
    }

    // Two-loop recursion.
    d.assign(g.begin(), g.end());
    std::vector<double> alpha_c(mem.size());
    for (int k = static_cast<int>(mem.size()) - 1; k >= 0; --k) {
      alpha_c[k] = rho[k] * dot(mem[k].first, d);
      const auto& y = mem[k].second;
      for (size_t i = 0; i < n; ++i) d[i] -= alpha_c[k] * y[i];
    }
    if (precond) {
      for (size_t i = 0; i < n; ++i) d[i] *= inv_diag[i];  // refreshed above
    } else {
      for (size_t i = 0; i < n; ++i) d[i] *= gamma;
    }
    for (size_t k = 0; k < mem.size(); ++k) {
      const double beta = rho[k] * dot(mem[k].second, d);
      const auto& s = mem[k].first;
      for (size_t i = 0; i < n; ++i) d[i] += (alpha_c[k] - beta) * s[i];
    }
    for (size_t i = 0; i < n; ++i) d[i] = -d[i];

    bool accepted = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      double step = 1.0;
      if (attempt == 1) {
        // Fall back to steepest descent when the quasi-Newton direction fails.
        for (size_t i = 0; i < n; ++i) d[i] = -g[i];
        mem.clear();
        rho.clear();
        gamma = 1.0;
      }
      if (mem.empty() && !precond) {
        // No curvature information: cap the first move at unit size so stiff
        // gradients cannot overshoot past the line search's reach.
        double dmax = 0.0;
        for (size_t i = 0; i < n; ++i) dmax = std::max(dmax, std::abs(d[i]));
        if (dmax > 1.0) step = 1.0 / dmax;
      }
      for (int ls = 0; ls < opts_.max_line_search; ++ls) {
        for (size_t i = 0; i < n; ++i) x_trial[i] = x[i] + step * d[i];
        project(x_trial, lo, hi);
        double pred = 0.0;  // g . (x_trial - x), the projected decrease model
        for (size_t i = 0; i < n; ++i) pred += g[i] * (x_trial[i] - x[i]);
        if (pred >= 0.0) {
          step *= 0.5;
          continue;
        }
        const double f_trial = f(x_trial, g_trial);
        if (!std::isfinite(f_trial)) {
          step *= 0.5;
          continue;
        }
        if (f_trial <= fx + opts_.armijo_c1 * pred) {
          // Curvature update.
          std::vector<double> s(n), y(n);
          for (size_t i = 0; i < n; ++i) {
            s[i] = x_trial[i] - x[i];
            y[i] = g_trial[i] - g[i];
          }
          const double sy = dot(s, y);
          if (sy > 1e-12 * std::sqrt(dot(s, s)) * std::sqrt(dot(y, y)) && sy > 0.0) {
            mem.emplace_back(std::move(s), std::move(y));
            rho.push_back(1.0 / sy);
            gamma = sy / dot(mem.back().second, mem.back().second);
            if (static_cast<int>(mem.size()) > opts_.memory) {
              mem.pop_front();
              rho.pop_front();
            }
          }
          x.swap(x_trial);
          g.swap(g_trial);
          fx = f_trial;
          if (energy_history) energy_history->push_back(fx);
          accepted = true;
          break;
        }
        step *= 0.5;
      }
    }
    res.iterations = iter + 1;
    if (!accepted) {
      // No decreasing step found in either direction: numerically stationary.
      res.converged = true;
      res.kkt_residual = projected_grad_norm(x, g, lo, hi);
      break;
    }
  }
  if (!res.converged) res.hit_iteration_cap = true;
  res.value = fx;
  return res;
}

}  // namespace cohesive
