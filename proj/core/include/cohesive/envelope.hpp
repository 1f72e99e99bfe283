#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cohesive/densities.hpp"
#include "cohesive/surface_params.hpp"

namespace cohesive {

// Uniformly sampled 1D graph with its lower convex hull.
struct EnvelopeGrid1D {
  std::vector<double> xs;
  std::vector<double> ys;
  std::vector<double> hull_ys;  // empty until convex_envelope_1d has run

  void write_csv(const std::string& path) const;  // two columns: x, hull (or y)
};

// Greatest convex minorant of the piecewise-linear interpolant, computed by a
// monotone-chain lower hull scan. O(N), idempotent.
EnvelopeGrid1D convex_envelope_1d(const EnvelopeGrid1D& input);

EnvelopeGrid1D sample_grid(double lo, double hi, int n,
                           const std::function<double(double)>& f);

// sup over delta_seq of hull(h_delta) on the grid, compared in sup norm with
// hull(Psi). Scalar densities only (1x1 inputs). The distance decreases as the
// largest delta approaches 1.
double verify_hdelta_limit(const BulkDensity& density, const SurfaceParams& params,
                           const std::vector<double>& delta_seq, const EnvelopeGrid1D& grid);

}  // namespace cohesive
