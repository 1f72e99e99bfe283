#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cohesive/common.hpp"

namespace cohesive {

enum class DensityKind { PowerQ, CompressiblePlus, CompressibleHat };

DensityKind density_kind_from_string(const std::string& s);
std::string to_string(DensityKind k);

// Bulk energy density with q-growth: (1/c)|xi|^q - c <= eval(xi) <= c(|xi|^q + 1).
//
// Built-in kinds:
//   PowerQ           |xi|^q on any shape, q > 1
//   CompressiblePlus (|xi|^2 - 2)_+^2 + alpha (det xi - 1)^2, 2x2, q = 4
//   CompressibleHat  (|xi|^2 - 2 det xi)^2 + alpha (det xi - 1)^2, 2x2, q = 4
class BulkDensity {
 public:
  BulkDensity(DensityKind kind, double q, double alpha = 0.0);

  static BulkDensity power(double q) { return BulkDensity(DensityKind::PowerQ, q); }
  static BulkDensity compressible_plus(double alpha) {
    return BulkDensity(DensityKind::CompressiblePlus, 4.0, alpha);
  }
  static BulkDensity compressible_hat(double alpha) {
    return BulkDensity(DensityKind::CompressibleHat, 4.0, alpha);
  }
  // Structured config record {kind, q, alpha}.
  static BulkDensity from_config(const std::string& kind, double q, double alpha);

  double eval(const Mat& xi) const;
  Mat grad(const Mat& xi) const;

  DensityKind kind() const { return kind_; }
  double q() const { return q_; }
  double alpha() const { return alpha_; }
  // Growth constant. Exact (1) for PowerQ, sampled estimate for the 2x2 kinds.
  double growth_constant() const { return c_; }

  void check_shape(const Mat& xi) const;

 private:
  double eval_impl_unsafe(const Mat& xi) const;

  DensityKind kind_;
  double q_;
  double alpha_;
  double c_;
};

// q-homogeneous recession density, lim Psi(t xi)/t^q. Closed form for the
// built-in kinds.
class RecessionDensity {
 public:
  explicit RecessionDensity(const BulkDensity& parent);

  double eval(const Mat& xi) const;
  Mat grad(const Mat& xi) const;

  const BulkDensity& parent() const { return parent_; }
  double q() const { return parent_.q(); }
  bool closed_form() const { return true; }

  // Max relative deviation |Psi(t xi)/t^q - eval(xi)| / max(eval(xi), 1)
  // over sampled unit xi at t = 1e3.
  double self_check(int samples = 32, double t = 1e3) const;

 private:
  BulkDensity parent_;
};

RecessionDensity recession(const BulkDensity& density);

struct ProjectionReport {
  bool holds = true;
  double worst_violation = 0.0;  // min over samples of Psi_inf(xi) - Psi_inf(xi nu (x) nu)
  std::optional<std::pair<Mat, Vec>> witness;
};

// Checks Psi_inf(xi) >= Psi_inf((xi nu) (x) nu) on the given samples.
// nu must be unit up to 1e-12.
ProjectionReport check_projection_property(const RecessionDensity& psi_inf,
                                           const std::vector<std::pair<Mat, Vec>>& samples,
                                           double tol = 1e-9);

// Convenience: random (xi, nu) samples of the given shape.
std::vector<std::pair<Mat, Vec>> projection_samples(int count, int m, int n, std::uint64_t seed);

struct SurfaceParams;

// min(Psi(xi), ell (1 - delta^{q'})^{1-p} Psi^{1/q}(xi)); the linear-growth
// approximation of Psi from below, nondecreasing in delta.
double hdelta(const BulkDensity& density, const SurfaceParams& params, double delta,
              const Mat& xi);

// Scalar variant used by the 1D envelope experiments.
double hdelta_scalar(const BulkDensity& density, const SurfaceParams& params, double delta,
                     double x);

}  // namespace cohesive
