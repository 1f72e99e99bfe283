#include "cohesive/envelope.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace cohesive {

void EnvelopeGrid1D::write_csv(const std::string& path) const {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw InputError("EnvelopeGrid1D::write_csv: cannot open " + path);
  std::fprintf(f, "x,value\n");
  const std::vector<double>& vals = hull_ys.empty() ? ys : hull_ys;
  for (size_t i = 0; i < xs.size(); ++i)
    std::fprintf(f, "%.17g,%.17g\n", xs[i], vals[i]);
  std::fclose(f);
}

EnvelopeGrid1D convex_envelope_1d(const EnvelopeGrid1D& input) {
  const auto& xs = input.xs;
  const auto& ys = input.ys;
  require(xs.size() == ys.size(), "convex_envelope_1d: xs/ys size mismatch");
  require(xs.size() >= 3, "convex_envelope_1d: need at least 3 points");
  for (size_t i = 0; i + 1 < xs.size(); ++i)
    require(xs[i] < xs[i + 1], "convex_envelope_1d: xs must be strictly increasing");
  for (double y : ys) require_finite(y, "convex_envelope_1d");

  // Lower hull of the graph. Cross-product test, no divisions.
  std::vector<size_t> hull;
  hull.reserve(xs.size());
  for (size_t i = 0; i < xs.size(); ++i) {
    while (hull.size() >= 2) {
      const size_t a = hull[hull.size() - 2], b = hull[hull.size() - 1];
      const double lhs = (ys[b] - ys[a]) * (xs[i] - xs[b]);
      const double rhs = (ys[i] - ys[b]) * (xs[b] - xs[a]);
      if (lhs >= rhs) hull.pop_back();
      else break;
    }
    hull.push_back(i);
  }

  EnvelopeGrid1D out;
  out.xs = xs;
  out.ys = ys;
  out.hull_ys.resize(xs.size());
  size_t seg = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    while (seg + 1 < hull.size() && xs[hull[seg + 1]] < xs[i]) ++seg;
    const size_t a = hull[seg];
    const size_t b = hull[std::min(seg + 1, hull.size() - 1)];
    if (a == b || xs[i] <= xs[a]) {
      out.hull_ys[i] = ys[a];
    } else {
      const double t = (xs[i] - xs[a]) / (xs[b] - xs[a]);
      out.hull_ys[i] = ys[a] + t * (ys[b] - ys[a]);
    }
  }
  return out;
}

EnvelopeGrid1D sample_grid(double lo, double hi, int n,
                           const std::function<double(double)>& f) {
  require(n >= 3 && hi > lo, "sample_grid: bad grid");
  EnvelopeGrid1D g;
  g.xs.resize(n);
  g.ys.resize(n);
  const double dx = (hi - lo) / (n - 1);
  for (int i = 0; i < n; ++i) {
    g.xs[i] = lo + i * dx;
    g.ys[i] = f(g.xs[i]);
  }
  return g;
}

double verify_hdelta_limit(const BulkDensity& density, const SurfaceParams& params,
                           const std::vector<double>& delta_seq, const EnvelopeGrid1D& grid) {
  require(!delta_seq.empty(), "verify_hdelta_limit: empty delta sequence");
  require(density.kind() == DensityKind::PowerQ,
          "verify_hdelta_limit: scalar (power_q) densities only");

  EnvelopeGrid1D psi = grid;
  for (size_t i = 0; i < grid.xs.size(); ++i) {
    Mat xi(1, 1);
    xi(0, 0) = grid.xs[i];
    psi.ys[i] = density.eval(xi);
  }
  EnvelopeGrid1D psi_hull = convex_envelope_1d(psi);

  std::vector<double> sup(grid.xs.size(), -std::numeric_limits<double>::infinity());
  for (double delta : delta_seq) {
    EnvelopeGrid1D hd = grid;
    for (size_t i = 0; i < grid.xs.size(); ++i)
      hd.ys[i] = hdelta_scalar(density, params, delta, grid.xs[i]);
    EnvelopeGrid1D hull = convex_envelope_1d(hd);
    for (size_t i = 0; i < sup.size(); ++i) sup[i] = std::max(sup[i], hull.hull_ys[i]);
  }

  double err = 0.0;
  for (size_t i = 0; i < sup.size(); ++i)
    err = std::max(err, std::abs(sup[i] - psi_hull.hull_ys[i]));
  return err;
}

}  // namespace cohesive
