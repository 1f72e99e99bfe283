#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cohesive/common.hpp"
#include "cohesive/densities.hpp"

namespace cohesive {

enum class FacetClass : std::uint8_t { Diffuse = 0, Jump = 1 };

// Cell-valued m-component field on a 1D/2D lattice with classified interior
// facets. Facet normals point along the positive axes; densities are expected
// to satisfy g(z, nu) = g(-z, -nu).
struct DiscreteSBV {
  int dim = 1;
  int nx = 0, ny = 1;  // cells per axis (ny = 1 in 1D)
  int m = 1;
  double h = 1.0;
  double jump_threshold = 10.0;  // facet is a jump when |diff| > threshold * h
  std::vector<double> values;    // nx*ny*m, cell-major
  std::vector<FacetClass> x_facets;  // (nx-1)*ny
  std::vector<FacetClass> y_facets;  // nx*(ny-1), empty in 1D

  int cells() const { return nx * ny; }
  int cell_index(int i, int j) const { return j * nx + i; }
  double value(int cell, int comp) const { return values[cell * m + comp]; }
  Vec cell_value(int cell) const;
  Vec facet_diff_x(int i, int j) const;  // value(i+1,j) - value(i,j)
  Vec facet_diff_y(int i, int j) const;

  void validate() const;

  // Classifies every facet by the jump threshold. Piecewise-constant fields
  // use threshold 0: every nonzero difference is a jump.
  static DiscreteSBV from_cells(int dim, int nx, int ny, int m, double h,
                                std::vector<double> values, double jump_threshold = 10.0);
  static DiscreteSBV piecewise_constant(int dim, int nx, int ny, int m, double h,
                                        std::vector<double> values);

  // |Du^comp| = sum over all facets of |difference| h^{dim-1}
  double total_variation_comp(int comp) const;
  // |Du| with the Euclidean norm of the difference vector
  double total_variation() const;
  // L1 norm of the absolutely continuous gradient (diffuse facets only)
  double grad_l1() const;

  void write(const std::string& path) const;
  static DiscreteSBV read(const std::string& path);
};

// Componentwise quantization step * floor(value/step + rho_i) with
// step = eps/sqrt(m). Output is piecewise constant; ||u - u_eps||_inf <= eps.
DiscreteSBV quantize(const DiscreteSBV& u, double eps, const std::vector<double>& rho);

// Componentwise offset selection by exact breakpoint enumeration: the returned
// rho achieves |D u_eps^i| <= |D u^i| for every component (ties: smallest rho).
std::vector<double> select_rho(const DiscreteSBV& u, double eps);

// Radial truncations: identity inside |z| <= a_k = 3^k, zero outside a_{k+1},
// magnitude ramped by a cubic smoothstep in between; 1-Lipschitz.
struct TruncationLadder {
  double a(int k) const;
  Vec apply(int k, const Vec& z) const;
};

DiscreteSBV truncate(const DiscreteSBV& u, int k, const TruncationLadder& ladder = {});

using SurfaceDensityFn = std::function<double(const Vec& jump, const Vec& normal)>;

// H_g = sum over jump facets of g([u], nu) h^{dim-1}
double surface_energy(const DiscreteSBV& u, const SurfaceDensityFn& g);
// H_Psi = sum over cells of Psi(grad u) h^{dim}, gradients from forward
// diffuse facets (zero where the forward facet is a jump or missing)
double bulk_energy(const DiscreteSBV& u, const BulkDensity& density);

// g0(s) = ell s^gamma: nondecreasing, subadditive, superlinear at 0.
struct G0Density {
  double gamma = 0.5;
  double ell = 1.0;
  G0Density() = default;
  G0Density(double gamma_, double ell_) : gamma(gamma_), ell(ell_) {
    require(gamma > 0.0 && gamma < 1.0, "G0Density: gamma outside (0,1)");
    require(ell > 0.0, "G0Density: ell must be > 0");
  }
  double operator()(double s) const { return ell * std::pow(s, gamma); }
};

struct QuantizationReport {
  double lhs = 0.0;             // H_g(u_eps)
  double hg_u = 0.0;            // H_g(u)
  double term_coarse = 0.0;     // (eps/delta)^gamma H_g(u)
  double term_fine = 0.0;       // (eta/eps)^{1-gamma} H_g(u)
  double term_band = 0.0;       // (eps/eta)^gamma H_g(u, {|[u]| in [eta, delta)})
  double term_gradient = 0.0;   // eps^{gamma-1} ||grad u||_L1
  double ratio = 0.0;           // empirical constant (lhs - H_g(u))_+ / sum of terms
  bool sup_bound_ok = false;    // ||u - u_eps||_inf <= eps
  bool tv_bound_ok = false;     // componentwise |Du_eps^i| <= |Du^i|
};

// Requires delta > 4 eps and 0 < eta < eps.
QuantizationReport verify_quantization_estimate(const DiscreteSBV& u, double eps, double delta,
                                                double eta, const G0Density& g0);

struct BvEllipticityResult {
  double lhs = 0.0;  // g(z, nu)
  double rhs = 0.0;  // H_g of the competitor on the cube
  bool violated = false;
};

// Single-competitor check of g(z,nu) <= int g([u],nu_u) over the unit cube.
// The competitor must equal the reference step z chi_{x.nu>0} on a boundary
// collar (in cells).
BvEllipticityResult bv_ellipticity_test(const SurfaceDensityFn& g, const Vec& z, const Vec& nu,
                                        const DiscreteSBV& competitor, int collar_cells = 2,
                                        double tol = 1e-9);

// Reference step z chi_{x.nu > 0} sampled at cell centers of the unit cube;
// nu must be axis-aligned (+-e_axis).
DiscreteSBV reference_step(int dim, int cells_per_side, const Vec& z, const Vec& nu);

// 1D split competitor: 0 -> theta z -> z with interfaces at -offset, +offset.
DiscreteSBV split_competitor_1d(int cells, const Vec& z, double theta, double offset = 0.2);

DiscreteSBV random_field(int dim, int nx, int ny, int m, double h, std::uint64_t seed,
                         double amplitude = 2.0, double jump_threshold = 10.0);

}  // namespace cohesive
