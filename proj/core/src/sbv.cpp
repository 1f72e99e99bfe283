#include "cohesive/sbv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

namespace cohesive {

namespace {

// floor with a snap window so that re-quantizing an already quantized field is
// an exact fixed point despite rounding in value/step.
double snapped_floor(double y) {
  const double f = std::floor(y);
  if (y - f >= 1.0 - 1e-9) return f + 1.0;
  return f;
}

}  // namespace

Vec DiscreteSBV::cell_value(int cell) const {
  Vec v(m);
  for (int k = 0; k < m; ++k) v[k] = values[cell * m + k];
  return v;
}

Vec DiscreteSBV::facet_diff_x(int i, int j) const {
  Vec d(m);
  for (int k = 0; k < m; ++k)
    d[k] = values[cell_index(i + 1, j) * m + k] - values[cell_index(i, j) * m + k];
  return d;
}

Vec DiscreteSBV::facet_diff_y(int i, int j) const {
  Vec d(m);
  for (int k = 0; k < m; ++k)
    d[k] = values[cell_index(i, j + 1) * m + k] - values[cell_index(i, j) * m + k];
  return d;
}

void DiscreteSBV::validate() const {
  require(dim == 1 || dim == 2, "DiscreteSBV: dim must be 1 or 2");
  require(nx >= 1 && ny >= 1, "DiscreteSBV: empty lattice");
  require(dim == 2 || ny == 1, "DiscreteSBV: 1D fields need ny = 1");
  require(m >= 1 && m <= 4, "DiscreteSBV: 1 <= m <= 4");
  require(h > 0.0, "DiscreteSBV: h must be > 0");
  require(static_cast<int>(values.size()) == nx * ny * m, "DiscreteSBV: values size mismatch");
  require(static_cast<int>(x_facets.size()) == (nx - 1) * ny,
          "DiscreteSBV: x facet size mismatch");
  require(static_cast<int>(y_facets.size()) == (dim == 2 ? nx * (ny - 1) : 0),
          "DiscreteSBV: y facet size mismatch");
  for (double v : values) require_finite(v, "DiscreteSBV::values");
}

DiscreteSBV DiscreteSBV::from_cells(int dim, int nx, int ny, int m, double h,
                                    std::vector<double> vals, double jump_threshold) {
  DiscreteSBV u;
  u.dim = dim;
  u.nx = nx;
  u.ny = dim == 2 ? ny : 1;
  u.m = m;
  u.h = h;
  u.jump_threshold = jump_threshold;
  u.values = std::move(vals);
  u.x_facets.assign((nx - 1) * u.ny, FacetClass::Diffuse);
  if (dim == 2) u.y_facets.assign(nx * (u.ny - 1), FacetClass::Diffuse);
  u.validate();
  const double cut = jump_threshold * h;
  for (int j = 0; j < u.ny; ++j)
    for (int i = 0; i + 1 < nx; ++i)
      if (u.facet_diff_x(i, j).norm() > cut) u.x_facets[j * (nx - 1) + i] = FacetClass::Jump;
  if (dim == 2)
    for (int j = 0; j + 1 < u.ny; ++j)
      for (int i = 0; i < nx; ++i)
        if (u.facet_diff_y(i, j).norm() > cut) u.y_facets[j * nx + i] = FacetClass::Jump;
  return u;
}

DiscreteSBV DiscreteSBV::piecewise_constant(int dim, int nx, int ny, int m, double h,
                                            std::vector<double> vals) {
  DiscreteSBV u = from_cells(dim, nx, ny, m, h, std::move(vals), 0.0);
  return u;
}

double DiscreteSBV::total_variation_comp(int comp) const {
  const double w = dim == 2 ? h : 1.0;
  double tv = 0.0;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i + 1 < nx; ++i) tv += std::abs(facet_diff_x(i, j)[comp]) * w;
  for (int j = 0; j + 1 < ny; ++j)
    for (int i = 0; i < nx; ++i) tv += std::abs(facet_diff_y(i, j)[comp]) * w;
  return tv;
}

double DiscreteSBV::total_variation() const {
  const double w = dim == 2 ? h : 1.0;
  double tv = 0.0;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i + 1 < nx; ++i) tv += facet_diff_x(i, j).norm() * w;
  for (int j = 0; j + 1 < ny; ++j)
    for (int i = 0; i < nx; ++i) tv += facet_diff_y(i, j).norm() * w;
  return tv;
}

double DiscreteSBV::grad_l1() const {
  const double w = dim == 2 ? h : 1.0;
  double acc = 0.0;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i + 1 < nx; ++i)
      if (x_facets[j * (nx - 1) + i] == FacetClass::Diffuse)
        acc += facet_diff_x(i, j).norm() * w;
  for (int j = 0; j + 1 < ny; ++j)
    for (int i = 0; i < nx; ++i)
      if (y_facets[j * nx + i] == FacetClass::Diffuse) acc += facet_diff_y(i, j).norm() * w;
  return acc;
}

DiscreteSBV quantize(const DiscreteSBV& u, double eps, const std::vector<double>& rho) {
  u.validate();
  require(eps > 0.0, "quantize: eps must be > 0");
  require(static_cast<int>(rho.size()) == u.m, "quantize: rho size mismatch");
  for (double r : rho) require(r >= 0.0 && r < 1.0, "quantize: rho outside [0,1)");
  const double step = eps / std::sqrt(static_cast<double>(u.m));
  std::vector<double> vals(u.values.size());
  for (int c = 0; c < u.cells(); ++c)
    for (int k = 0; k < u.m; ++k) {
      const double y = u.values[c * u.m + k] / step + rho[k];
      vals[c * u.m + k] = step * snapped_floor(y);
    }
  return DiscreteSBV::piecewise_constant(u.dim, u.nx, u.ny, u.m, u.h, std::move(vals));
}

std::vector<double> select_rho(const DiscreteSBV& u, double eps) {
  u.validate();
  require(eps > 0.0, "select_rho: eps must be > 0");
  const double step = eps / std::sqrt(static_cast<double>(u.m));
  std::vector<double> rho(u.m, 0.0);

  for (int k = 0; k < u.m; ++k) {
    const double tv_u = u.total_variation_comp(k);
    // Breakpoints of rho -> |Du_eps^k|: fractional parts where value/step + rho
    // crosses an integer.
    std::vector<double> brk;
    brk.reserve(u.cells() + 2);
    brk.push_back(0.0);
    brk.push_back(1.0);
    for (int c = 0; c < u.cells(); ++c) {
      const double y = u.values[c * u.m + k] / step;
      double f = y - std::floor(y);
      brk.push_back(1.0 - f);
    }
    std::sort(brk.begin(), brk.end());
    brk.erase(std::unique(brk.begin(), brk.end()), brk.end());

    // Materialize the quantized values so the comparison reproduces exactly
    // what total_variation_comp computes on the output field.
    auto tv_of = [&](double r) {
      double tv = 0.0;
      const double w = u.dim == 2 ? u.h : 1.0;
      auto qv = [&](int c) { return step * snapped_floor(u.values[c * u.m + k] / step + r); };
      for (int j = 0; j < u.ny; ++j)
        for (int i = 0; i + 1 < u.nx; ++i)
          tv += std::abs(qv(u.cell_index(i + 1, j)) - qv(u.cell_index(i, j))) * w;
      for (int j = 0; j + 1 < u.ny; ++j)
        for (int i = 0; i < u.nx; ++i)
          tv += std::abs(qv(u.cell_index(i, j + 1)) - qv(u.cell_index(i, j))) * w;
      return tv;
    };

    // The mean of |Du_eps^k| over rho in [0,1) equals |Du^k| exactly, so some
    // subinterval value is <= |Du^k|. Candidates: subinterval midpoints plus
    // the left endpoints themselves (rho = 0 handles already-quantized data).
    bool found = false;
    for (size_t s = 0; s + 1 < brk.size() && !found; ++s) {
      for (double cand : {brk[s], 0.5 * (brk[s] + brk[s + 1])}) {
        if (tv_of(cand) <= tv_u) {
          rho[k] = cand;
          found = true;
          break;
        }
      }
    }
    if (!found) {
      // Round-off fallback: take the scanned minimum.
      double best = std::numeric_limits<double>::infinity(), best_r = 0.0;
      for (size_t s = 0; s + 1 < brk.size(); ++s) {
        const double mid = 0.5 * (brk[s] + brk[s + 1]);
        const double tv = tv_of(mid);
        if (tv < best) {
          best = tv;
          best_r = mid;
        }
      }
      rho[k] = best_r;
    }
  }
  return rho;
}

double TruncationLadder::a(int k) const {
  require(k >= 1, "TruncationLadder: k must be >= 1");
  return std::pow(3.0, k);
}

Vec TruncationLadder::apply(int k, const Vec& z) const {
  const double ak = a(k), ak1 = a(k + 1);
  const double r = z.norm();
  if (r <= ak) return z;
  if (r >= ak1) return Vec::Zero(z.size());
  const double x = (r - ak) / (ak1 - ak);
  const double mag = ak * (1.0 - x * x * (3.0 - 2.0 * x));
  return (mag / r) * z;
}

DiscreteSBV truncate(const DiscreteSBV& u, int k, const TruncationLadder& ladder) {
  u.validate();
  std::vector<double> vals(u.values.size());
  for (int c = 0; c < u.cells(); ++c) {
    Vec t = ladder.apply(k, u.cell_value(c));
    for (int comp = 0; comp < u.m; ++comp) vals[c * u.m + comp] = t[comp];
  }
  return DiscreteSBV::from_cells(u.dim, u.nx, u.ny, u.m, u.h, std::move(vals),
                                 u.jump_threshold);
}

double surface_energy(const DiscreteSBV& u, const SurfaceDensityFn& g) {
  u.validate();
  const double w = u.dim == 2 ? u.h : 1.0;
  Vec ex = Vec::Zero(u.dim), ey = Vec::Zero(u.dim);
  ex[0] = 1.0;
  if (u.dim == 2) ey[1] = 1.0;
  double acc = 0.0;
  for (int j = 0; j < u.ny; ++j)
    for (int i = 0; i + 1 < u.nx; ++i)
      if (u.x_facets[j * (u.nx - 1) + i] == FacetClass::Jump)
        acc += g(u.facet_diff_x(i, j), ex) * w;
  for (int j = 0; j + 1 < u.ny; ++j)
    for (int i = 0; i < u.nx; ++i)
      if (u.y_facets[j * u.nx + i] == FacetClass::Jump) acc += g(u.facet_diff_y(i, j), ey) * w;
  return acc;
}

double bulk_energy(const DiscreteSBV& u, const BulkDensity& density) {
  u.validate();
  const double hn = std::pow(u.h, u.dim);
  double acc = 0.0;
  Mat grad(u.m, u.dim);
  for (int j = 0; j < u.ny; ++j)
    for (int i = 0; i < u.nx; ++i) {
      grad.setZero();
      if (i + 1 < u.nx && u.x_facets[j * (u.nx - 1) + i] == FacetClass::Diffuse)
        grad.col(0) = u.facet_diff_x(i, j) / u.h;
      if (u.dim == 2 && j + 1 < u.ny && u.y_facets[j * u.nx + i] == FacetClass::Diffuse)
        grad.col(1) = u.facet_diff_y(i, j) / u.h;
      acc += density.eval(grad) * hn;
    }
  return acc;
}

QuantizationReport verify_quantization_estimate(const DiscreteSBV& u, double eps, double delta,
                                                double eta, const G0Density& g0) {
  require(delta > 4.0 * eps, "verify_quantization_estimate: need delta > 4 eps");
  require(eta > 0.0 && eta < eps, "verify_quantization_estimate: need 0 < eta < eps");
  QuantizationReport rep;

  const std::vector<double> rho = select_rho(u, eps);
  const DiscreteSBV ue = quantize(u, eps, rho);

  auto g_iso = [&](const Vec& jump, const Vec&) { return g0(jump.norm()); };
  rep.lhs = surface_energy(ue, g_iso);
  rep.hg_u = surface_energy(u, g_iso);

  double hg_band = 0.0;
  {
    const double w = u.dim == 2 ? u.h : 1.0;
    for (int j = 0; j < u.ny; ++j)
      for (int i = 0; i + 1 < u.nx; ++i)
        if (u.x_facets[j * (u.nx - 1) + i] == FacetClass::Jump) {
          const double a = u.facet_diff_x(i, j).norm();
          if (a >= eta && a < delta) hg_band += g0(a) * w;
        }
    for (int j = 0; j + 1 < u.ny; ++j)
      for (int i = 0; i < u.nx; ++i)
        if (u.y_facets[j * u.nx + i] == FacetClass::Jump) {
          const double a = u.facet_diff_y(i, j).norm();
          if (a >= eta && a < delta) hg_band += g0(a) * w;
        }
  }

  rep.term_coarse = std::pow(eps / delta, g0.gamma) * rep.hg_u;
  rep.term_fine = std::pow(eta / eps, 1.0 - g0.gamma) * rep.hg_u;
  rep.term_band = std::pow(eps / eta, g0.gamma) * hg_band;
  rep.term_gradient = std::pow(eps, g0.gamma - 1.0) * u.grad_l1();
  const double denom = rep.term_coarse + rep.term_fine + rep.term_band + rep.term_gradient;
  rep.ratio = denom > 0.0 ? std::max(rep.lhs - rep.hg_u, 0.0) / denom : 0.0;

  double worst = 0.0;
  for (int c = 0; c < u.cells(); ++c) {
    double d2 = 0.0;
    for (int k = 0; k < u.m; ++k) {
      const double d = u.values[c * u.m + k] - ue.values[c * u.m + k];
      d2 += d * d;
    }
    worst = std::max(worst, std::sqrt(d2));
  }
  rep.sup_bound_ok = worst <= eps;
  rep.tv_bound_ok = true;
  for (int k = 0; k < u.m; ++k)
    if (ue.total_variation_comp(k) > u.total_variation_comp(k)) rep.tv_bound_ok = false;
  return rep;
}

DiscreteSBV reference_step(int dim, int cells_per_side, const Vec& z, const Vec& nu) {
  require(dim == 1 || dim == 2, "reference_step: dim must be 1 or 2");
  require(nu.size() == dim, "reference_step: nu dimension mismatch");
  int axis = -1;
  for (int d = 0; d < dim; ++d)
    if (std::abs(std::abs(nu[d]) - 1.0) < 1e-12) axis = d;
  require(axis >= 0, "reference_step: nu must be axis-aligned");
  const int n = cells_per_side;
  const double h = 1.0 / n;
  const int ny = dim == 2 ? n : 1;
  const int m = static_cast<int>(z.size());
  std::vector<double> vals(n * ny * m, 0.0);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < n; ++i) {
      const double x0 = -0.5 + (i + 0.5) * h;
      const double x1 = -0.5 + (j + 0.5) * h;
      const double t = (axis == 0 ? x0 : x1) * nu[axis];
      if (t > 0.0)
        for (int k = 0; k < m; ++k) vals[(j * n + i) * m + k] = z[k];
    }
  return DiscreteSBV::piecewise_constant(dim, n, ny, m, h, std::move(vals));
}

DiscreteSBV split_competitor_1d(int cells, const Vec& z, double theta, double offset) {
  require(theta >= 0.0 && theta <= 1.0, "split_competitor_1d: theta outside [0,1]");
  require(offset > 0.0 && offset < 0.45, "split_competitor_1d: offset outside (0, 0.45)");
  const double h = 1.0 / cells;
  const int m = static_cast<int>(z.size());
  std::vector<double> vals(cells * m, 0.0);
  for (int i = 0; i < cells; ++i) {
    const double x = -0.5 + (i + 0.5) * h;
    double w = 0.0;
    if (x > -offset) w = theta;
    if (x > offset) w = 1.0;
    for (int k = 0; k < m; ++k) vals[i * m + k] = w * z[k];
  }
  return DiscreteSBV::piecewise_constant(1, cells, 1, m, h, std::move(vals));
}

BvEllipticityResult bv_ellipticity_test(const SurfaceDensityFn& g, const Vec& z, const Vec& nu,
                                        const DiscreteSBV& competitor, int collar_cells,
                                        double tol) {
  competitor.validate();
  const DiscreteSBV ref = reference_step(competitor.dim, competitor.nx, z, nu);
  require(ref.ny == competitor.ny && ref.m == competitor.m,
          "bv_ellipticity_test: competitor shape mismatch");
  for (int j = 0; j < competitor.ny; ++j)
    for (int i = 0; i < competitor.nx; ++i) {
      const bool in_collar = i < collar_cells || i >= competitor.nx - collar_cells ||
                             (competitor.dim == 2 &&
                              (j < collar_cells || j >= competitor.ny - collar_cells));
      if (!in_collar) continue;
      for (int k = 0; k < competitor.m; ++k)
        if (competitor.values[(j * competitor.nx + i) * competitor.m + k] !=
            ref.values[(j * ref.nx + i) * ref.m + k])
          throw InputError("bv_ellipticity_test: competitor differs from the reference step "
                           "on the boundary collar");
    }
  BvEllipticityResult res;
  res.lhs = g(z, nu);
  res.rhs = surface_energy(competitor, g);
  res.violated = res.lhs > res.rhs + tol;
  return res;
}

DiscreteSBV random_field(int dim, int nx, int ny, int m, double h, std::uint64_t seed,
                         double amplitude, double jump_threshold) {
  Rng rng(seed);
  std::uniform_real_distribution<double> dist(-amplitude, amplitude);
  const int cells = nx * (dim == 2 ? ny : 1);
  std::vector<double> vals(cells * m);
  for (double& v : vals) v = dist(rng);
  return DiscreteSBV::from_cells(dim, nx, dim == 2 ? ny : 1, m, h, std::move(vals),
                                 jump_threshold);
}

void DiscreteSBV::write(const std::string& path) const {
  validate();
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw InputError("DiscreteSBV::write: cannot open " + path);
  std::fprintf(f, "cohesive-sbv v1\ndim %d\nshape %d %d\nm %d\nh %.17g\nthreshold %.17g\n",
               dim, nx, ny, m, h, jump_threshold);
  std::fprintf(f, "data\n");
  std::fwrite(values.data(), sizeof(double), values.size(), f);
  std::fwrite(x_facets.data(), sizeof(FacetClass), x_facets.size(), f);
  if (!y_facets.empty()) std::fwrite(y_facets.data(), sizeof(FacetClass), y_facets.size(), f);
  std::fclose(f);
}

DiscreteSBV DiscreteSBV::read(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw InputError("DiscreteSBV::read: cannot open " + path);
  DiscreteSBV u;
  char magic[32] = {0};
  if (std::fscanf(f, "cohesive-sbv v%31s\n", magic) != 1 || std::strcmp(magic, "1") != 0) {
    std::fclose(f);
    throw InputError("DiscreteSBV::read: bad magic in " + path);
  }
  int ok = std::fscanf(f, "dim %d\nshape %d %d\nm %d\nh %lg\nthreshold %lg\n", &u.dim, &u.nx,
                       &u.ny, &u.m, &u.h, &u.jump_threshold);
  char line[16] = {0};
  if (ok != 6 || !std::fgets(line, sizeof(line), f) || std::strncmp(line, "data", 4) != 0) {
    std::fclose(f);
    throw InputError("DiscreteSBV::read: bad header in " + path);
  }
  u.values.resize(u.nx * u.ny * u.m);
  u.x_facets.resize((u.nx - 1) * u.ny);
  if (u.dim == 2) u.y_facets.resize(u.nx * (u.ny - 1));
  size_t got = std::fread(u.values.data(), sizeof(double), u.values.size(), f);
  got += std::fread(u.x_facets.data(), sizeof(FacetClass), u.x_facets.size(), f);
  if (!u.y_facets.empty())
    got += std::fread(u.y_facets.data(), sizeof(FacetClass), u.y_facets.size(), f);
  std::fclose(f);
  if (got != u.values.size() + u.x_facets.size() + u.y_facets.size())
    throw InputError("DiscreteSBV::read: truncated payload in " + path);
  u.validate();
  return u;
}

}  // namespace cohesive
