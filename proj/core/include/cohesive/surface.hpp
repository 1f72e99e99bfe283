#pragma once

#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cohesive/densities.hpp"
#include "cohesive/lbfgs.hpp"
#include "cohesive/surface_params.hpp"

namespace cohesive {

constexpr double kInfiniteM = std::numeric_limits<double>::infinity();

// Discretized 1D optimal-profile pair (alpha, beta) on [-T/2, T/2].
// Boundary conditions: beta(+-T/2) = 1, alpha(-T/2) = 0, alpha(T/2) = z.
struct Profile {
  double T = 4.0;
  int N = 1001;                // node count
  int m = 1;                   // components of alpha
  Vec z;                       // jump amplitude, size m
  Vec nu;                      // unit normal; enters through psi_inf(alpha' (x) nu)
  std::vector<double> alpha;   // N*m, node-major
  std::vector<double> beta;    // N, in [0,1]

  double dt() const { return T / (N - 1); }
  double node(int i) const { return -0.5 * T + i * dt(); }
  void validate() const;

  // beta dips linearly to max(0, 1 - |z|^{1/(p+1)}) on a unit-width well at 0,
  // alpha is a smoothed step across the well.
  static Profile default_init(const Vec& z, const Vec& nu, double T, int N,
                              const SurfaceParams& params);
};

struct CellSolveOptions {
  int max_iters = 4000;
  double grad_tol = 1e-9;
  double m_num = 1e12;         // numeric cap for the infinite coefficient
  int restarts = 3;
  std::vector<double> t_schedule = {4.0, 8.0, 16.0, 32.0};
  double nodes_per_unit = 250.0;  // keeps T/N = 4/1000 at defaults
  double stop_tol = 1e-3;         // relative Cauchy tolerance across T
  bool polish_only = false;       // skip the shaping stages (near-optimal init)
};

// Midpoint/forward-difference quadrature of the normalized (eps = 1) cell
// integrand coeff * psi_inf(alpha' (x) nu) + (1-beta)^{q'}/kappa + |beta'|^q,
// coeff = min(M^{q-1}, degradation(beta_mid)^q). The product coeff * psi_inf
// is zero whenever psi_inf vanishes, even for an infinite coefficient.
double cell_energy(const Profile& profile, const RecessionDensity& psi_inf,
                   const SurfaceParams& params, double M = kInfiniteM,
                   double m_num = 1e12);

// Young-inequality dissipation bound sum (1 - beta_mid)|delta beta|; never
// exceeds cell_energy up to quadrature round-off.
double crack_lower_bound(const Profile& profile);

struct CellSolveReport {
  double value = 0.0;
  int iterations = 0;
  double kkt_residual = 0.0;
  bool converged = false;
  std::vector<double> energy_history;
};

// Projected L-BFGS descent of the cell energy with beta boxed to [0,1] and
// endpoint pins. Returns the best profile over the restart inits (and the
// caller-provided one, when given).
std::pair<Profile, CellSolveReport> minimize_cell(
    const Vec& z, const Vec& nu, double T, int N, double M,
    const RecessionDensity& psi_inf, const SurfaceParams& params,
    const std::optional<Profile>& init = std::nullopt,
    const CellSolveOptions& opts = {});

struct GEstimate {
  double value = 0.0;
  double T_used = 0.0;
  int N_used = 0;
  double M_used = kInfiniteM;
  Profile profile;
  std::vector<std::pair<double, double>> convergence_history;  // (T, value)
  bool converged = false;
  bool young_bound_ok = true;  // crack_lower_bound <= value + 1e-8 on the profile

  // per-window diagnostics backing the CSV row schema
  struct WindowRecord {
    double T = 0.0;
    int N = 0;
    double value = 0.0;
    double lower_bound = 0.0;
    int iterations = 0;
    bool converged = false;
  };
  std::vector<WindowRecord> records;
};

// T-extrapolated cell value: runs minimize_cell over the schedule with
// warm-started profiles and stops when successive values are Cauchy.
GEstimate estimate_g(const Vec& z, const Vec& nu, const RecessionDensity& psi_inf,
                     const SurfaceParams& params, const CellSolveOptions& opts = {},
                     double M = kInfiniteM);

// Window-free scalar form: inf over (alpha, beta) on (0,1) of
// |1-beta| (degradation(beta)^q |alpha'|^q + |beta'|^q)^{1/q},
// beta(0) = beta(1) = 1, alpha: 0 -> s. Independent route from estimate_g.
struct GScalResult {
  double value = 0.0;
  int N = 0;
  int iterations = 0;
  bool converged = false;
  bool young_bound_ok = true;
  std::vector<double> alpha, beta;
};

GScalResult g_scal(double s, const SurfaceParams& params, int N = 2000,
                   const CellSolveOptions& opts = {});

// Exact discrete scal integrand of an explicit profile on the unit window;
// evaluation hook for competitor profiles.
double g_scal_energy(const std::vector<double>& alpha, const std::vector<double>& beta,
                     const SurfaceParams& params);

struct ExponentFit {
  double exponent = 0.0;
  double r2 = 0.0;
  double c_upper = 0.0;  // max g / s^{2/(p+1)} over the window
  double c_lower = 0.0;  // min of the same ratio
  std::vector<std::pair<double, double>> samples;  // (s, g)
};

// Least-squares slope of log g_scal(s) vs log s on a log-spaced grid.
ExponentFit fit_small_jump_exponent(const SurfaceParams& params,
                                    const std::vector<double>& s_grid, int N = 2000,
                                    const CellSolveOptions& opts = {});

std::vector<double> log_spaced(double lo, double hi, int count);

}  // namespace cohesive
