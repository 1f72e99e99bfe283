#pragma once

namespace cohesive {

// Marginal along one axis of the normalized bump exp(-1/(1-|x|^2)) on the unit
// ball of R^2, tabulated once. Provides the two 1D boundary-data profiles of
// the 2D cell problem:
//   step(t)  = (chi_{x.nu > 0} * phi)(t nu)       in [0,1], 0 below -1, 1 above 1
//   plateau(t) = (chi_{|x.nu| >= 2} * phi)(t nu)  0 on |t| <= 1, 1 on |t| >= 3
class MollifierMarginal {
 public:
  MollifierMarginal();

  double density(double s) const;  // the marginal itself, supported in [-1,1]
  double cdf(double t) const;
  double step(double t) const { return cdf(t); }
  double plateau(double t) const { return cdf(t - 2.0) + 1.0 - cdf(t + 2.0); }

  static const MollifierMarginal& instance();

 private:
  static constexpr int kTable = 4001;
  double values_[kTable];
  double cdf_[kTable];
};

}  // namespace cohesive
