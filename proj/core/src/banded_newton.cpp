#include "cohesive/banded_newton.hpp"

#include <algorithm>
#include <cmath>

#include "cohesive/common.hpp"

namespace cohesive {

bool BandMatrix::factor(double damping) {
  factored_ = data_;
  const int n = n_, hb = hb_;
  auto at = [&](int i, int j) -> double& {
    return factored_[static_cast<size_t>(i - j) * n + j];
  };
  for (int j = 0; j < n; ++j) at(j, j) *= 1.0 + damping;
  // Banded LDL^T, L unit lower triangular stored over the band.
  for (int j = 0; j < n; ++j) {
    double dj = at(j, j);
    const int kmin = std::max(0, j - hb);
    for (int k = kmin; k < j; ++k) {
      const double ljk = at(j, k);
      dj -= ljk * ljk * at(k, k);
    }
    if (!(dj > 0.0) || !std::isfinite(dj)) return false;
    at(j, j) = dj;
    const int imax = std::min(n - 1, j + hb);
    for (int i = j + 1; i <= imax; ++i) {
      double v = at(i, j);
      const int klo = std::max({0, i - hb, j - hb});
      for (int k = klo; k < j; ++k) v -= at(i, k) * at(j, k) * at(k, k);
      at(i, j) = v / dj;
    }
  }
  return true;
}

void BandMatrix::solve(std::vector<double>& rhs) const {
  const int n = n_, hb = hb_;
  auto at = [&](int i, int j) -> double {
    return factored_[static_cast<size_t>(i - j) * n + j];
  };
  for (int i = 0; i < n; ++i) {
    double v = rhs[i];
    const int klo = std::max(0, i - hb);
    for (int k = klo; k < i; ++k) v -= at(i, k) * rhs[k];
    rhs[i] = v;
  }
  for (int i = 0; i < n; ++i) rhs[i] /= at(i, i);
  for (int i = n - 1; i >= 0; --i) {
    double v = rhs[i];
    const int kmax = std::min(n - 1, i + hb);
    for (int k = i + 1; k <= kmax; ++k) v -= at(k, i) * rhs[k];
    rhs[i] = v;
  }
}

LbfgsResult banded_newton_minimize(const std::function<double(const std::vector<double>&,
                                                              std::vector<double>&)>& f,
                                   const BandedHessianFn& hessian, int half_bandwidth,
                                   std::vector<double>& x, const std::vector<double>& lo,
                                   const std::vector<double>& hi, const NewtonOptions& opts,
                                   std::vector<double>* energy_history) {
  const size_t n = x.size();
  require(lo.size() == n && hi.size() == n, "banded_newton: bounds size mismatch");
  for (size_t i = 0; i < n; ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);

  std::vector<double> g(n), step(n), x_trial(n), g_trial(n);
  BandMatrix h(static_cast<int>(n), half_bandwidth);

  double fx = f(x, g);
  if (!std::isfinite(fx)) throw DivergenceError("banded_newton: non-finite initial energy");
  if (energy_history) energy_history->push_back(fx);

  LbfgsResult res;
  res.value = fx;
  double damping = 1e-4;
  double f_old5 = fx;
  int since_check = 0;

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    double pg = 0.0;
    for (size_t i = 0; i < n; ++i) {
      double gi = g[i];
      if (x[i] <= lo[i] && gi > 0.0) gi = 0.0;
      if (x[i] >= hi[i] && gi < 0.0) gi = 0.0;
      pg = std::max(pg, std::abs(gi));
    }
    res.kkt_residual = pg;
    if (pg <= opts.grad_tol) {
      res.converged = true;
      break;
    }

    h.clear();
    hessian(x, h);
    // Active bounds and pins: decouple the variable so the step elsewhere is
    // unpolluted; the projection keeps the variable itself in place.
    for (size_t i = 0; i < n; ++i) {
      const bool pinned = lo[i] == hi[i];
      const bool active_lo = x[i] <= lo[i] && g[i] > 0.0;
      const bool active_hi = x[i] >= hi[i] && g[i] < 0.0;
      if (pinned || active_lo || active_hi) {
        const int ii = static_cast<int>(i);
        for (int k = 1; k <= half_bandwidth; ++k) {
          if (ii + k < static_cast<int>(n)) h.set(ii + k, ii, 0.0);
          if (ii - k >= 0) h.set(ii, ii - k, 0.0);
        }
        h.set(ii, ii, std::max(h.get(ii, ii), 1.0));
      }
    }

    bool accepted = false;
    for (int attempt = 0; attempt < 12 && !accepted; ++attempt) {
      if (!h.factor(damping)) {
        damping *= 10.0;
        continue;
      }
      step.assign(g.begin(), g.end());
      h.solve(step);
      for (size_t i = 0; i < n; ++i) step[i] = -step[i];

      double tau = 1.0;
      for (int ls = 0; ls < opts.max_line_search; ++ls) {
        for (size_t i = 0; i < n; ++i)
          x_trial[i] = std::clamp(x[i] + tau * step[i], lo[i], hi[i]);
        double pred = 0.0;
        for (size_t i = 0; i < n; ++i) pred += g[i] * (x_trial[i] - x[i]);
        if (pred >= 0.0) {
          tau *= 0.5;
          continue;
        }
        const double ft = f(x_trial, g_trial);
        if (std::isfinite(ft) && ft <= fx + 1e-4 * pred) {
          x.swap(x_trial);
          g.swap(g_trial);
          fx = ft;
          if (energy_history) energy_history->push_back(fx);
          accepted = true;
          damping = std::max(damping / 3.0, 1e-9);
          break;
        }
        tau *= 0.5;
      }
      if (!accepted) damping *= 10.0;
    }
    res.iterations = iter + 1;
    if (!accepted) {
      res.converged = true;  // no decreasing step at any damping: stationary
      break;
    }
    if (++since_check >= 5) {
      if (f_old5 - fx <= opts.f_tol * std::max(1.0, std::abs(fx))) {
        res.converged = true;
        break;
      }
      f_old5 = fx;
      since_check = 0;
    }
  }
  if (!res.converged) res.hit_iteration_cap = true;
  res.value = fx;
  return res;
}

}  // namespace cohesive
