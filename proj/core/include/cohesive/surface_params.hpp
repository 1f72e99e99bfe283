#pragma once

#include <cmath>
#include <limits>

#include "cohesive/common.hpp"

namespace cohesive {

// Parameters (p, q, ell) of the degradation/dissipation pair, with the derived
// conjugate exponent q' and the dissipation normalization kappa = q' q^{q'/q}.
struct SurfaceParams {
  double p = 2.0;
  double q = 2.0;
  double ell = 1.0;

  SurfaceParams() = default;
  SurfaceParams(double p_, double q_, double ell_) : p(p_), q(q_), ell(ell_) {
    require(p > 1.0, "SurfaceParams: p must be > 1");
    require(q > 1.0, "SurfaceParams: q must be > 1");
    require(ell > 0.0, "SurfaceParams: ell must be > 0");
  }

  double qprime() const { return q / (q - 1.0); }
  double kappa() const { return qprime() * std::pow(q, qprime() / q); }

  // ell t / (1-t)^p on [0,1); +inf at t = 1.
  double degradation(double t) const {
    require(t >= 0.0 && t <= 1.0, "degradation: t outside [0,1]");
    if (t >= 1.0) return std::numeric_limits<double>::infinity();
    return ell * t / std::pow(1.0 - t, p);
  }

  double degradation_deriv(double t) const {
    require(t >= 0.0 && t < 1.0, "degradation_deriv: t outside [0,1)");
    const double omt = 1.0 - t;
    return ell * (omt + p * t) / std::pow(omt, p + 1.0);
  }

  // min(1, eps^{1-1/q} degradation(t)), set to 1 at t = 1.
  double degradation_eps(double t, double eps) const {
    require(eps > 0.0, "degradation_eps: eps must be > 0");
    require(t >= 0.0 && t <= 1.0, "degradation_eps: t outside [0,1]");
    if (t >= 1.0) return 1.0;
    const double v = std::pow(eps, 1.0 - 1.0 / q) * degradation(t);
    return v < 1.0 ? v : 1.0;
  }
};

}  // namespace cohesive
