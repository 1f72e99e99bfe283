#include "cohesive/densities.hpp"

#include <algorithm>
#include <cmath>

#include "cohesive/surface_params.hpp"

namespace cohesive {

namespace {

double det2(const Mat& xi) { return xi(0, 0) * xi(1, 1) - xi(0, 1) * xi(1, 0); }

// d(det)/dxi for 2x2, the cofactor matrix.
Mat cof2(const Mat& xi) {
  Mat c(2, 2);
  c(0, 0) = xi(1, 1);
  c(0, 1) = -xi(1, 0);
  c(1, 0) = -xi(0, 1);
  c(1, 1) = xi(0, 0);
  return c;
}

}  // namespace

DensityKind density_kind_from_string(const std::string& s) {
  if (s == "power_q") return DensityKind::PowerQ;
  if (s == "compressible_plus") return DensityKind::CompressiblePlus;
  if (s == "compressible_hat") return DensityKind::CompressibleHat;
  throw InputError("unknown density kind: " + s);
}

std::string to_string(DensityKind k) {
  switch (k) {
    case DensityKind::PowerQ: return "power_q";
    case DensityKind::CompressiblePlus: return "compressible_plus";
    case DensityKind::CompressibleHat: return "compressible_hat";
  }
  return "?";
}

BulkDensity::BulkDensity(DensityKind kind, double q, double alpha)
    : kind_(kind), q_(q), alpha_(alpha), c_(1.0) {
  require(q > 1.0, "BulkDensity: q must be > 1");
  require(alpha >= 0.0, "BulkDensity: alpha must be >= 0");
  if (kind != DensityKind::PowerQ) {
    require(q == 4.0, "BulkDensity: compressible variants have q = 4");
    // The growth constant is not pinned by the model; estimate it on a sampled
    // ball |xi| <= 10 and double the worst ratio.
    Rng rng(0x9e3779b97f4a7c15ull);
    double c = 1.0;
    for (int s = 0; s < 4096; ++s) {
      Mat xi = random_matrix(rng, 2, 2, -10.0 / 2, 10.0 / 2);
      const double n = xi.norm();
      if (n > 10.0 || n < 1e-6) continue;
      const double psi = eval_impl_unsafe(xi);
      const double nq = std::pow(n, q_);
      c = std::max(c, psi / (nq + 1.0));
      // smallest c with (1/c)|xi|^q - c <= psi
      c = std::max(c, 0.5 * (std::sqrt(psi * psi + 4.0 * nq) - psi));
    }
    c_ = 2.0 * c;
  }
}

BulkDensity BulkDensity::from_config(const std::string& kind, double q, double alpha) {
  return BulkDensity(density_kind_from_string(kind), q, alpha);
}

void BulkDensity::check_shape(const Mat& xi) const {
  if (kind_ != DensityKind::PowerQ) {
    if (xi.rows() != 2 || xi.cols() != 2)
      throw ShapeError("BulkDensity: compressible variants need 2x2 input, got " +
                       std::to_string(xi.rows()) + "x" + std::to_string(xi.cols()));
  }
  if (xi.rows() < 1 || xi.cols() < 1) throw ShapeError("BulkDensity: empty matrix");
}

double BulkDensity::eval(const Mat& xi) const {
  check_shape(xi);
  require_finite(xi, "BulkDensity::eval");
  return eval_impl_unsafe(xi);
}

Mat BulkDensity::grad(const Mat& xi) const {
  check_shape(xi);
  require_finite(xi, "BulkDensity::grad");
  switch (kind_) {
    case DensityKind::PowerQ: {
      const double n = xi.norm();
      if (n == 0.0) return Mat::Zero(xi.rows(), xi.cols());
      return q_ * std::pow(n, q_ - 2.0) * xi;
    }
    case DensityKind::CompressiblePlus: {
      const double excess = xi.squaredNorm() - 2.0;
      const double d = det2(xi);
      Mat g = Mat::Zero(2, 2);
      if (excess > 0.0) g += 4.0 * excess * xi;
      g += 2.0 * alpha_ * (d - 1.0) * cof2(xi);
      return g;
    }
    case DensityKind::CompressibleHat: {
      const double d = det2(xi);
      const double w = xi.squaredNorm() - 2.0 * d;
      Mat g = 2.0 * w * (2.0 * xi - 2.0 * cof2(xi));
      g += 2.0 * alpha_ * (d - 1.0) * cof2(xi);
      return g;
    }
  }
  return Mat();
}

double BulkDensity::eval_impl_unsafe(const Mat& xi) const {
  switch (kind_) {
    case DensityKind::PowerQ:
      return std::pow(xi.norm(), q_);
    case DensityKind::CompressiblePlus: {
      const double excess = std::max(xi.squaredNorm() - 2.0, 0.0);
      const double d = det2(xi);
      return excess * excess + alpha_ * (d - 1.0) * (d - 1.0);
    }
    case DensityKind::CompressibleHat: {
      const double d = det2(xi);
      const double w = xi.squaredNorm() - 2.0 * d;
      return w * w + alpha_ * (d - 1.0) * (d - 1.0);
    }
  }
  return 0.0;
}

RecessionDensity::RecessionDensity(const BulkDensity& parent) : parent_(parent) {}

RecessionDensity recession(const BulkDensity& density) { return RecessionDensity(density); }

double RecessionDensity::eval(const Mat& xi) const {
  parent_.check_shape(xi);
  require_finite(xi, "RecessionDensity::eval");
  switch (parent_.kind()) {
    case DensityKind::PowerQ:
      return std::pow(xi.norm(), parent_.q());
    case DensityKind::CompressiblePlus: {
      const double n2 = xi.squaredNorm();
      const double d = det2(xi);
      return n2 * n2 + parent_.alpha() * d * d;
    }
    case DensityKind::CompressibleHat: {
      const double d = det2(xi);
      const double w = xi.squaredNorm() - 2.0 * d;
      return w * w + parent_.alpha() * d * d;
    }
  }
  return 0.0;
}

Mat RecessionDensity::grad(const Mat& xi) const {
  parent_.check_shape(xi);
  require_finite(xi, "RecessionDensity::grad");
  switch (parent_.kind()) {
    case DensityKind::PowerQ: {
      const double n = xi.norm();
      if (n == 0.0) return Mat::Zero(xi.rows(), xi.cols());
      return parent_.q() * std::pow(n, parent_.q() - 2.0) * xi;
    }
    case DensityKind::CompressiblePlus: {
      const double d = det2(xi);
      Mat g = 4.0 * xi.squaredNorm() * xi;
      g += 2.0 * parent_.alpha() * d * cof2(xi);
      return g;
    }
    case DensityKind::CompressibleHat: {
      const double d = det2(xi);
      const double w = xi.squaredNorm() - 2.0 * d;
      Mat g = 2.0 * w * (2.0 * xi - 2.0 * cof2(xi));
      g += 2.0 * parent_.alpha() * d * cof2(xi);
      return g;
    }
  }
  return Mat();
}

double RecessionDensity::self_check(int samples, double t) const {
  const int m = parent_.kind() == DensityKind::PowerQ ? 1 : 2;
  const int n = m;
  Rng rng(7);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    Mat xi = random_matrix(rng, m, n, -1.0, 1.0);
    const double nn = xi.norm();
    if (nn < 1e-3) continue;
    xi /= nn;
    const double lim = eval(xi);
    const double ratio = parent_.eval(t * xi) / std::pow(t, parent_.q());
    worst = std::max(worst, std::abs(ratio - lim) / std::max(lim, 1.0));
  }
  return worst;
}

ProjectionReport check_projection_property(const RecessionDensity& psi_inf,
                                           const std::vector<std::pair<Mat, Vec>>& samples,
                                           double tol) {
  ProjectionReport report;
  report.worst_violation = std::numeric_limits<double>::infinity();
  for (const auto& [xi, nu] : samples) {
    require(std::abs(nu.norm() - 1.0) <= 1e-12, "check_projection_property: nu not unit");
    require(xi.cols() == nu.size(), "check_projection_property: xi/nu shape mismatch");
    Mat projected = (xi * nu) * nu.transpose();
    const double gap = psi_inf.eval(xi) - psi_inf.eval(projected);
    if (gap < report.worst_violation) {
      report.worst_violation = gap;
      if (gap < -tol) {
        report.holds = false;
        report.witness = std::make_pair(xi, nu);
      }
    }
  }
  if (samples.empty()) report.worst_violation = 0.0;
  return report;
}

std::vector<std::pair<Mat, Vec>> projection_samples(int count, int m, int n,
                                                    std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::pair<Mat, Vec>> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    out.emplace_back(random_matrix(rng, m, n, -3.0, 3.0), random_unit_vector(rng, n));
  }
  return out;
}

double hdelta(const BulkDensity& density, const SurfaceParams& params, double delta,
              const Mat& xi) {
  require(delta > 0.0 && delta < 1.0, "hdelta: delta outside (0,1)");
  const double psi = density.eval(xi);
  const double coeff =
      params.ell * std::pow(1.0 - std::pow(delta, params.qprime()), 1.0 - params.p);
  return std::min(psi, coeff * std::pow(psi, 1.0 / params.q));
}

double hdelta_scalar(const BulkDensity& density, const SurfaceParams& params, double delta,
                     double x) {
  Mat xi(1, 1);
  xi(0, 0) = x;
  return hdelta(density, params, delta, xi);
}

}  // namespace cohesive
