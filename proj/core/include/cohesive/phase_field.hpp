#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cohesive/densities.hpp"
#include "cohesive/sbv.hpp"
#include "cohesive/surface_params.hpp"

namespace cohesive {

// Nodal (u, v) pair on a uniform 1D/2D grid with regularization length eps.
struct PhaseFieldState {
  int dim = 1;
  int nx = 2, ny = 1;  // node counts per axis (ny = 1 in 1D)
  double h = 1.0;
  int m = 1;
  double eps = 0.1;
  double origin_x = 0.0, origin_y = 0.0;
  std::vector<double> u;  // nx*ny*m, node-major
  std::vector<double> v;  // nx*ny

  int nodes() const { return nx * ny; }
  int node_index(int i, int j) const { return j * nx + i; }
  double x_of(int i) const { return origin_x + i * h; }
  double y_of(int j) const { return origin_y + j * h; }
  double min_v() const;
  void validate() const;

  static PhaseFieldState bar_1d(int n_nodes, double length, double eps, int m = 1);
  static PhaseFieldState grid_2d(int n_nodes_per_axis, double side, double eps, int m);

  void write(const std::string& path) const;  // text header + raw doubles
  static PhaseFieldState read(const std::string& path);
};

// Per-node Dirichlet constraints for u components and v.
struct BoundaryCondition {
  std::vector<std::uint8_t> u_fixed;  // nodes*m
  std::vector<double> u_value;
  std::vector<std::uint8_t> v_fixed;  // nodes
  std::vector<double> v_value;

  static BoundaryCondition none(const PhaseFieldState& s);
  // 1D bar with u(0) = 0 and u(L) = z.
  static BoundaryCondition bar_ends(const PhaseFieldState& s, const Vec& z);
  // Mollified jump data on every boundary node of a 2D grid:
  // u = (z chi_{x.nu>0}) * phi_w and v = chi_{|x.nu| >= 2w} * phi_w.
  static BoundaryCondition mollified_jump(const PhaseFieldState& s, const Vec& z,
                                          const Vec& nu, double width = 1.0);

  void apply(PhaseFieldState& s) const;
  void check_shape(const PhaseFieldState& s) const;
};

// Optional augmentation eta_eps Psi(grad u) + |u - w|^r per cell.
struct FidelityTerm {
  std::vector<double> w;  // nodal, nodes*m
  double r = 2.0;
  double eta_eps = 0.0;
};

// Cell-wise quadrature of
//   f_eps^q(v_c) Psi(grad u_c) + (1-v_c)^{q'}/(kappa eps) + eps^{q-1}|grad v_c|^q
// with v averaged to cell centers and forward-difference gradients.
double assemble_energy(const PhaseFieldState& state, const BulkDensity& density,
                       const SurfaceParams& params, const BoundaryCondition& bc,
                       const FidelityTerm* fidelity = nullptr);

// Analytic gradient of assemble_energy; entries of constrained DOFs are zero.
void energy_gradient(const PhaseFieldState& state, const BulkDensity& density,
                     const SurfaceParams& params, const BoundaryCondition& bc,
                     std::vector<double>& du, std::vector<double>& dv,
                     const FidelityTerm* fidelity = nullptr);

struct StaggeredOptions {
  int outer_iters = 80;
  int inner_iters = 400;
  double inner_grad_tol = 1e-9;
  double energy_tol = 1e-10;  // relative decrease per outer cycle
};

struct StaggeredResult {
  PhaseFieldState state;
  double energy = 0.0;
  std::vector<double> history;  // energy after each half-step
  int outer_iterations = 0;
  bool converged = false;
};

// Alternating minimization: u at fixed v, then v at fixed u (boxed to [0,1]).
// The energy never increases across half-steps.
StaggeredResult staggered_minimize(const PhaseFieldState& state0, const BulkDensity& density,
                                   const SurfaceParams& params, const BoundaryCondition& bc,
                                   const StaggeredOptions& opts = {},
                                   const FidelityTerm* fidelity = nullptr);

struct CellProblem2dResult {
  double value = 0.0;           // total energy
  double value_per_area = 0.0;  // value / T^{n-1}
  PhaseFieldState state;
  std::vector<double> history;
  bool converged = false;
};

// n-D (n = 2) cell problem: minimizes the eps = 1 functional with the
// recession coefficient min(m_num^{q-1}, degradation(v)^q) Psi_inf(grad u) and
// mollified boundary data on the square of side T. nu must be axis-aligned.
CellProblem2dResult cell_energy_2d(const Vec& z, const Vec& nu, double T, double h,
                                   const RecessionDensity& psi_inf,
                                   const SurfaceParams& params,
                                   const StaggeredOptions& opts = {}, double m_num = 1e12);

// Thresholded-field lower bound via the coarea scan.
struct SbvThresholdResult {
  DiscreteSBV ubar;        // u chi_{Phi(v) > tbar} on the node lattice
  double tbar = 0.0;
  double delta = 0.0;
  double lower_bound = 0.0;
  double energy = 0.0;     // assemble_energy of the input state
  double perimeter = 0.0;  // crossing facets * h^{dim-1}
  int jump_facets = 0;
};

// Picks tbar in (Phi(delta^{q'}), Phi(delta)) minimizing the crossing
// perimeter, builds ubar, and returns
//   delta^{q'+1} sum_{pass cells} h_delta(grad u_c) h^dim + beta_delta Per
//   - h_delta(0) |{v_c <= delta}|,
// which is checked against assemble_energy of the state.
SbvThresholdResult slicing_lower_bound(const PhaseFieldState& state,
                                       const BulkDensity& density,
                                       const SurfaceParams& params, double delta);

struct GammaSweepRow {
  double eps = 0.0;
  double h = 0.0;
  double energy = 0.0;
  double min_v = 1.0;
  int iterations = 0;
  bool jump_indicator = false;
  bool solver_ok = true;
};

struct GammaSweepResult {
  std::vector<GammaSweepRow> rows;
  double elastic_ref = 0.0;  // Psi(z/L) L  (Psi^qc = Psi for the built-ins)
  double crack_ref = 0.0;    // g_scal(|z|)
  double limit_ref = 0.0;    // min of the two
  PhaseFieldState final_state;
};

// 1D bar of length L with u pinned to 0 and z at the ends; one staggered solve
// per eps (h = eps * h_over_eps), warm-started and multi-initialized.
GammaSweepResult gamma_sweep(double L, double z, const BulkDensity& density,
                             const SurfaceParams& params, const std::vector<double>& eps_list,
                             double h_over_eps = 0.25, const StaggeredOptions& opts = {});

// |z*|^q Psi-elastic cost equals g_scal(|z*|); bisection bracket on [lo, hi].
double crossover_jump(double L, const BulkDensity& density, const SurfaceParams& params,
                      double lo = 0.05, double hi = 5.0, int iters = 20);

}  // namespace cohesive
