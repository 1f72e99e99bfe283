#include "cohesive/mollifier.hpp"

#include <cmath>

namespace cohesive {

namespace {

double bump2d(double x, double y) {
  const double r2 = x * x + y * y;
  if (r2 >= 1.0) return 0.0;
  return std::exp(-1.0 / (1.0 - r2));
}

}  // namespace

MollifierMarginal::MollifierMarginal() {
  // Marginal by quadrature over the second coordinate, then normalize so the
  // cdf ends at exactly 1.
  const int inner = 801;
  for (int i = 0; i < kTable; ++i) {
    const double s = -1.0 + 2.0 * i / (kTable - 1);
    const double half = std::sqrt(std::max(0.0, 1.0 - s * s));
    double acc = 0.0;
    if (half > 0.0) {
      const double dy = 2.0 * half / (inner - 1);
      for (int j = 0; j < inner; ++j) {
        const double y = -half + j * dy;
        const double w = (j == 0 || j == inner - 1) ? 0.5 : 1.0;
        acc += w * bump2d(s, y);
      }
      acc *= dy;
    }
    values_[i] = acc;
  }
  cdf_[0] = 0.0;
  const double ds = 2.0 / (kTable - 1);
  for (int i = 1; i < kTable; ++i)
    cdf_[i] = cdf_[i - 1] + 0.5 * (values_[i - 1] + values_[i]) * ds;
  const double total = cdf_[kTable - 1];
  for (int i = 0; i < kTable; ++i) {
    values_[i] /= total;
    cdf_[i] /= total;
  }
}

double MollifierMarginal::density(double s) const {
  if (s <= -1.0 || s >= 1.0) return 0.0;
  const double x = (s + 1.0) * 0.5 * (kTable - 1);
  const int i = static_cast<int>(x);
  const double w = x - i;
  if (i + 1 >= kTable) return values_[kTable - 1];
  return (1.0 - w) * values_[i] + w * values_[i + 1];
}

double MollifierMarginal::cdf(double t) const {
  if (t <= -1.0) return 0.0;
  if (t >= 1.0) return 1.0;
  const double x = (t + 1.0) * 0.5 * (kTable - 1);
  const int i = static_cast<int>(x);
  const double w = x - i;
  if (i + 1 >= kTable) return cdf_[kTable - 1];
  return (1.0 - w) * cdf_[i] + w * cdf_[i + 1];
}

const MollifierMarginal& MollifierMarginal::instance() {
  static MollifierMarginal m;
  return m;
}

}  // namespace cohesive
