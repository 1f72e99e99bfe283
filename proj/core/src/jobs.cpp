#include "cohesive/jobs.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <future>
#include <limits>
#include <sstream>
#include <thread>

#include "cohesive/densities.hpp"
#include "cohesive/envelope.hpp"
#include "cohesive/phase_field.hpp"
#include "cohesive/sbv.hpp"
#include "cohesive/surface.hpp"

namespace cohesive {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct RowBuilder {
  std::string subcommand;
  std::string params;
  Clock::time_point t0 = Clock::now();
  std::vector<ResultRow> rows;

  void add(const std::string& metric, double value, double tol, bool pass) {
    rows.push_back({subcommand, params, metric, value, tol, pass, ms_since(t0)});
    t0 = Clock::now();
  }
  void add(const std::string& metric, double value) {
    add(metric, value, std::numeric_limits<double>::quiet_NaN(), true);
  }
  bool all_pass() const {
    return std::all_of(rows.begin(), rows.end(), [](const ResultRow& r) { return r.pass; });
  }
};

SurfaceParams params_of(const KeyValueConfig& cfg) {
  return SurfaceParams(cfg.get_double("p", 2.0), cfg.get_double("q", 2.0),
                       cfg.get_double("ell", 1.0));
}

BulkDensity density_of(const KeyValueConfig& cfg) {
  const std::string kind = cfg.get_string("density", "power_q");
  const double q = cfg.get_double("density_q", cfg.get_double("q", 2.0));
  const double alpha = cfg.get_double("alpha", 1.0);
  return BulkDensity::from_config(kind, kind == "power_q" ? q : 4.0, alpha);
}

CellSolveOptions cell_opts_of(const KeyValueConfig& cfg) {
  CellSolveOptions opts;
  opts.t_schedule = cfg.get_list("T_schedule", opts.t_schedule);
  opts.nodes_per_unit = cfg.get_double("N_per_unit", opts.nodes_per_unit);
  opts.max_iters = cfg.get_int("max_iters", opts.max_iters);
  opts.restarts = cfg.get_int("restarts", opts.restarts);
  opts.stop_tol = cfg.get_double("stop_tol", opts.stop_tol);
  opts.m_num = cfg.get_double("M_num", opts.m_num);
  return opts;
}

Vec vec_of(const std::vector<double>& v) {
  Vec out(static_cast<int>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) out[static_cast<int>(i)] = v[i];
  return out;
}

std::string num_tag(double x) {
  std::ostringstream ss;
  ss << x;
  std::string s = ss.str();
  for (char& c : s)
    if (c == '.' || c == '-' || c == '+') c = '_';
  return s;
}

// --- subcommand implementations -------------------------------------------

// Concatenation competitor: the optimal windows for za and zb glued end to
// end are feasible for za + zb, making discrete subadditivity structural.
double g_with_concat(double za, double zb, const RecessionDensity& rec,
                     const SurfaceParams& sp, const CellSolveOptions& opts) {
  Vec nu(1);
  nu[0] = 1.0;
  Vec a(1), b(1), zsum(1);
  a[0] = za;
  b[0] = zb;
  zsum[0] = za + zb;
  GEstimate ga = estimate_g(a, nu, rec, sp, opts);
  GEstimate gb = estimate_g(b, nu, rec, sp, opts);
  GEstimate gs = estimate_g(zsum, nu, rec, sp, opts);
  double value = gs.value;

  const Profile &pa = ga.profile, &pb = gb.profile;
  Profile cat;
  cat.T = pa.T + pb.T;
  cat.N = pa.N + pb.N - 1;
  cat.m = 1;
  cat.z = zsum;
  cat.nu = nu;
  cat.alpha.resize(cat.N);
  cat.beta.resize(cat.N);
  for (int i = 0; i < pa.N; ++i) {
    cat.alpha[i] = pa.alpha[i];
    cat.beta[i] = pa.beta[i];
  }
  for (int i = 1; i < pb.N; ++i) {
    cat.alpha[pa.N - 1 + i] = pb.alpha[i] + za;
    cat.beta[pa.N - 1 + i] = pb.beta[i];
  }
  auto [prof, rep] = minimize_cell(zsum, nu, cat.T, cat.N, kInfiniteM, rec, sp, cat, opts);
  value = std::min(value, rep.value);
  (void)prof;
  return value;
}

void job_cell_density(const KeyValueConfig& cfg, std::uint64_t seed, RowBuilder& rb) {
  const SurfaceParams sp = params_of(cfg);
  const BulkDensity bulk = density_of(cfg);
  const RecessionDensity rec = recession(bulk);
  CellSolveOptions opts = cell_opts_of(cfg);
  const std::string mode = cfg.get_string("mode", "estimate");
  const double M = cfg.get_double("M", kInfiniteM);

  if (mode == "estimate" || mode == "compare-scal" || mode == "truncation") {
    const std::vector<double> zs = cfg.get_list("z", {1.0});
    // detailed per-window schema: z, T, N, M, value, lower_bound, iterations, converged
    std::FILE* cell_csv = nullptr;
    const std::string cell_path = cfg.get_string("cell_csv", "");
    if (!cell_path.empty()) {
      cell_csv = std::fopen(cell_path.c_str(), "w");
      if (!cell_csv) throw InputError("cell-density: cannot open " + cell_path);
      std::fprintf(cell_csv, "# cohesive-phase cell rows v1\n");
      std::fprintf(cell_csv, "z,T,N,M,value,lower_bound,iterations,converged\n");
    }
    for (double z : zs) {
      Vec zv(1), nu(1);
      zv[0] = z;
      nu[0] = 1.0;
      GEstimate est = estimate_g(zv, nu, rec, sp, opts, M);
      if (cell_csv)
        for (const auto& w : est.records)
          std::fprintf(cell_csv, "%s,%g,%d,%s,%s,%s,%d,%d\n", format_double(std::abs(z)).c_str(),
                       w.T, w.N, format_double(M).c_str(), format_double(w.value).c_str(),
                       format_double(w.lower_bound).c_str(), w.iterations,
                       w.converged ? 1 : 0);
      const double lb = crack_lower_bound(est.profile);
      for (const auto& [T, value] : est.convergence_history)
        rb.add("g_T" + num_tag(T) + "_z" + num_tag(z), value);
      rb.add("g_value_z" + num_tag(z), est.value, std::numeric_limits<double>::quiet_NaN(),
             est.converged && est.young_bound_ok);
      rb.add("young_slack_z" + num_tag(z), est.value - lb, 1e-8, lb <= est.value + 1e-8);
      if (mode == "compare-scal") {
        GScalResult gs = g_scal(std::abs(z), sp, cfg.get_int("N_scal", 2000), opts);
        const double gap = std::abs(est.value - gs.value) / std::max(gs.value, 1e-12);
        rb.add("g_scal_z" + num_tag(z), gs.value);
        rb.add("scal_rel_gap_z" + num_tag(z), gap, 0.02, gap <= 0.02);
      }
      if (mode == "truncation") {
        GEstimate full = estimate_g(zv, nu, rec, sp, opts, kInfiniteM);
        const double gap =
            std::abs(est.value - full.value) / std::max(full.value, 1e-12);
        rb.add("g_untruncated_z" + num_tag(z), full.value);
        rb.add("truncation_rel_gap_z" + num_tag(z), gap, 0.01, gap <= 0.01);
      }
    }
    if (cell_csv) std::fclose(cell_csv);
  } else if (mode == "subadd") {
    const int pairs = cfg.get_int("pairs", 100);
    const double zmax = cfg.get_double("zmax", 5.0);
    const double tol = cfg.get_double("tol", 2e-3);
    Rng rng(seed);
    std::uniform_real_distribution<double> logu(std::log(1e-2), std::log(zmax));
    std::uniform_int_distribution<int> sign(0, 1);
    double worst = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < pairs; ++i) {
      const double za = (sign(rng) ? 1 : -1) * std::exp(logu(rng));
      const double zb = (sign(rng) ? 1 : -1) * std::exp(logu(rng));
      Vec nu(1), a(1), b(1);
      nu[0] = 1.0;
      a[0] = za;
      b[0] = zb;
      const double gsum = g_with_concat(za, zb, rec, sp, opts);
      const double ga = estimate_g(a, nu, rec, sp, opts).value;
      const double gb = estimate_g(b, nu, rec, sp, opts).value;
      worst = std::max(worst, gsum - ga - gb);
    }
    rb.add("subadd_pairs", pairs);
    rb.add("subadd_worst_slack", worst, tol, worst <= tol);
  } else if (mode == "2d") {
    const Vec z = vec_of(cfg.get_list("z", {1.0, 0.0}));
    const Vec nu = vec_of(cfg.get_list("nu", {0.0, 1.0}));
    const std::vector<double> t_list = cfg.get_list("T_list", {16.0});
    const double h = cfg.get_double("h", 0.25);
    StaggeredOptions sopts;
    sopts.outer_iters = cfg.get_int("outer_iters", 60);
    sopts.inner_iters = cfg.get_int("inner_iters", 400);
    double prev = std::numeric_limits<double>::infinity();
    bool decreasing = true;
    double last = 0.0;
    for (double T : t_list) {
      CellProblem2dResult r = cell_energy_2d(z, nu, T, h, rec, sp, sopts);
      last = r.value_per_area;
      rb.add("value_per_area_T" + num_tag(T), r.value_per_area);
      if (r.value_per_area > prev + 1e-12) decreasing = false;
      prev = r.value_per_area;
    }
    if (t_list.size() > 1)
      rb.add("value_per_area_decreasing", decreasing ? 1.0 : 0.0, 0.0, decreasing);
    if (cfg.get_bool("compare_scal", false)) {
      GScalResult gs = g_scal(z.norm(), sp, 2000, opts);
      const double gap = std::abs(last - gs.value) / std::max(gs.value, 1e-12);
      rb.add("g_scal_ref", gs.value);
      rb.add("rel_gap_2d", gap, 0.10, gap <= 0.10);
    }
  } else {
    throw InputError("cell-density: unknown mode " + mode);
  }
}

void job_g_scal(const KeyValueConfig& cfg, std::uint64_t, RowBuilder& rb) {
  const SurfaceParams sp = params_of(cfg);
  CellSolveOptions opts = cell_opts_of(cfg);
  const int N = cfg.get_int("N", 2000);
  for (double s : cfg.get_list("s", {1.0})) {
    GScalResult r = g_scal(s, sp, N, opts);
    rb.add("g_scal_s" + num_tag(s), r.value, 1.02,
           r.value <= 1.02 && r.young_bound_ok && r.converged);
  }
}

void job_exponent_fit(const KeyValueConfig& cfg, std::uint64_t, RowBuilder& rb) {
  const double q = cfg.get_double("q", 2.0);
  const double ell = cfg.get_double("ell", 1.0);
  CellSolveOptions opts = cell_opts_of(cfg);
  const int N = cfg.get_int("N", 2000);
  const int points = cfg.get_int("points", 8);
  const double s_lo = cfg.get_double("s_lo", 1e-3);
  const double s_hi = cfg.get_double("s_hi", 1e-1);
  const double tol = cfg.get_double("exponent_tol", 0.15);
  for (double p : cfg.get_list("p", {2.0})) {
    const SurfaceParams sp(p, q, ell);
    ExponentFit fit = fit_small_jump_exponent(sp, log_spaced(s_lo, s_hi, points), N, opts);
    const double target = 2.0 / (p + 1.0);
    rb.add("exponent_p" + num_tag(p), fit.exponent, tol,
           std::abs(fit.exponent - target) <= tol);
    rb.add("r2_p" + num_tag(p), fit.r2, 0.98, fit.r2 >= 0.98);
    rb.add("c_upper_p" + num_tag(p), fit.c_upper);
    rb.add("c_lower_p" + num_tag(p), fit.c_lower);
  }
}

// Central-difference audit used by the gradcheck mode.
double pf_gradcheck_worst(const BulkDensity& density, const SurfaceParams& sp, int dim, int m,
                          std::uint64_t seed, int states) {
  Rng rng(seed);
  std::uniform_real_distribution<double> uv(0.15, 0.75), uu(-1.0, 1.0);
  double worst = 0.0;
  for (int s = 0; s < states; ++s) {
    PhaseFieldState st = dim == 1 ? PhaseFieldState::bar_1d(9, 1.0, 0.1, m)
                                  : PhaseFieldState::grid_2d(5, 1.0, 0.1, m);
    for (double& x : st.u) x = uu(rng);
    for (double& x : st.v) x = uv(rng);
    BoundaryCondition bc = BoundaryCondition::none(st);
    std::vector<double> du, dv;
    energy_gradient(st, density, sp, bc, du, dv);
    const double step = 1e-6;
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < st.u.size(); ++i) {
      PhaseFieldState sp1 = st, sp2 = st;
      sp1.u[i] += step;
      sp2.u[i] -= step;
      const double fd = (assemble_energy(sp1, density, sp, bc) -
                         assemble_energy(sp2, density, sp, bc)) /
                        (2 * step);
      num += (du[i] - fd) * (du[i] - fd);
      den += fd * fd;
    }
    for (size_t i = 0; i < st.v.size(); ++i) {
      PhaseFieldState sp1 = st, sp2 = st;
      sp1.v[i] += step;
      sp2.v[i] -= step;
      const double fd = (assemble_energy(sp1, density, sp, bc) -
                         assemble_energy(sp2, density, sp, bc)) /
                        (2 * step);
      num += (dv[i] - fd) * (dv[i] - fd);
      den += fd * fd;
    }
    worst = std::max(worst, std::sqrt(num) / std::max(std::sqrt(den), 1e-12));
  }
  return worst;
}

double bulk_gradcheck_worst(const BulkDensity& density, int m, int n, std::uint64_t seed,
                            int points) {
  Rng rng(seed);
  double worst = 0.0;
  for (int s = 0; s < points; ++s) {
    Mat xi = random_matrix(rng, m, n, -2.0, 2.0);
    const double nn = xi.norm();
    if (nn < 0.1) continue;
    std::uniform_real_distribution<double> mag(0.1, 10.0);
    xi *= mag(rng) / nn;
    Mat g = density.grad(xi);
    double num = 0.0, den = 0.0;
    const double step = 1e-6 * std::max(1.0, xi.norm());
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        Mat x1 = xi, x2 = xi;
        x1(i, j) += step;
        x2(i, j) -= step;
        const double fd = (density.eval(x1) - density.eval(x2)) / (2 * step);
        num += (g(i, j) - fd) * (g(i, j) - fd);
        den += fd * fd;
      }
    worst = std::max(worst, std::sqrt(num) / std::max(std::sqrt(den), 1e-12));
  }
  return worst;
}

void job_sweep_gamma(const KeyValueConfig& cfg, std::uint64_t seed, RowBuilder& rb) {
  const SurfaceParams sp = params_of(cfg);
  const std::string mode = cfg.get_string("mode", "sweep");
  StaggeredOptions sopts;
  sopts.outer_iters = cfg.get_int("outer_iters", 80);
  sopts.inner_iters = cfg.get_int("inner_iters", 400);

  if (mode == "sweep") {
    const BulkDensity bulk = density_of(cfg);
    const double L = cfg.get_double("L", 1.0);
    const std::vector<double> eps_list =
        cfg.get_list("eps_list", {0.1, 0.05, 0.025, 0.0125});
    for (double z : cfg.get_list("z", {1.0})) {
      GammaSweepResult r = gamma_sweep(L, z, bulk, sp, eps_list, 0.25, sopts);
      for (const auto& row : r.rows)
        rb.add("energy_z" + num_tag(z) + "_eps" + num_tag(row.eps), row.energy,
               std::numeric_limits<double>::quiet_NaN(), row.solver_ok);
      const std::string dump = cfg.get_string("dump_state", "");
      if (!dump.empty()) r.final_state.write(dump + ".z" + num_tag(z) + ".field");
      const GammaSweepRow& last = r.rows.back();
      const double gap = std::abs(last.energy - r.limit_ref) / std::max(r.limit_ref, 1e-12);
      rb.add("limit_ref_z" + num_tag(z), r.limit_ref);
      rb.add("final_rel_gap_z" + num_tag(z), gap, 0.10, gap <= 0.10);
      const bool expect_jump = r.crack_ref < r.elastic_ref;
      rb.add("jump_indicator_z" + num_tag(z), last.jump_indicator ? 1.0 : 0.0, 0.0,
             last.jump_indicator == expect_jump);
    }
  } else if (mode == "crossover") {
    const BulkDensity bulk = density_of(cfg);
    const double L = cfg.get_double("L", 1.0);
    const double margin = cfg.get_double("margin", 0.05);
    const double eps = cfg.get_double("eps", 0.0125);
    const double zstar = crossover_jump(L, bulk, sp, cfg.get_double("lo", 0.05),
                                        cfg.get_double("hi", 5.0), cfg.get_int("iters", 20));
    rb.add("crossover_z", zstar);
    GammaSweepResult below = gamma_sweep(L, zstar * (1.0 - margin), bulk, sp, {eps}, 0.25, sopts);
    GammaSweepResult above = gamma_sweep(L, zstar * (1.0 + margin), bulk, sp, {eps}, 0.25, sopts);
    const bool flips = !below.rows.back().jump_indicator && above.rows.back().jump_indicator;
    rb.add("jump_below", below.rows.back().jump_indicator ? 1.0 : 0.0);
    rb.add("jump_above", above.rows.back().jump_indicator ? 1.0 : 0.0);
    rb.add("indicator_flips", flips ? 1.0 : 0.0, 0.0, flips);
  } else if (mode == "gradcheck") {
    const int states = cfg.get_int("states", 20);
    const double tol = cfg.get_double("tol", 1e-5);
    struct Case {
      const char* name;
      BulkDensity density;
      int m, n;
    };
    const std::vector<Case> cases = {
        {"power_q2", BulkDensity::power(2.0), 1, 1},
        {"power_q1_5", BulkDensity::power(1.5), 2, 2},
        {"compressible_plus", BulkDensity::compressible_plus(1.0), 2, 2},
        {"compressible_hat", BulkDensity::compressible_hat(1.0), 2, 2},
    };
    for (const Case& c : cases) {
      const double worst = bulk_gradcheck_worst(c.density, c.m, c.n, seed, 100);
      rb.add(std::string("bulk_grad_rel_") + c.name, worst, tol, worst <= tol);
    }
    const double w1 = pf_gradcheck_worst(BulkDensity::power(2.0), sp, 1, 1, seed + 1, states);
    rb.add("pf_grad_rel_power_1d", w1, tol, w1 <= tol);
    const double w2 = pf_gradcheck_worst(BulkDensity::power(3.0), SurfaceParams(2.0, 3.0, 1.0),
                                         2, 2, seed + 2, states);
    rb.add("pf_grad_rel_power_2d", w2, tol, w2 <= tol);
    const SurfaceParams sp4(2.0, 4.0, 1.0);
    const double w3 =
        pf_gradcheck_worst(BulkDensity::compressible_plus(1.0), sp4, 2, 2, seed + 3, states);
    rb.add("pf_grad_rel_plus_2d", w3, tol, w3 <= tol);
    const double w4 =
        pf_gradcheck_worst(BulkDensity::compressible_hat(1.0), sp4, 2, 2, seed + 4, states);
    rb.add("pf_grad_rel_hat_2d", w4, tol, w4 <= tol);
  } else if (mode == "slicing") {
    const BulkDensity bulk = density_of(cfg);
    const std::vector<double> z_list = cfg.get_list("z", {0.1, 0.5, 1.0, 2.0, 10.0});
    const std::vector<double> eps_list = cfg.get_list("eps_list", {0.05, 0.025});
    const std::vector<double> deltas = cfg.get_list("deltas", {0.3, 0.6, 0.9});
    double worst_excess = -std::numeric_limits<double>::infinity();
    int states = 0;
    int crack_jump_facets = 0;
    for (double z : z_list)
      for (double eps : eps_list) {
        GammaSweepResult r = gamma_sweep(1.0, z, bulk, sp, {2.0 * eps, eps}, 0.25, sopts);
        const PhaseFieldState& st = r.final_state;
        ++states;
        for (double delta : deltas) {
          SbvThresholdResult sres = slicing_lower_bound(st, bulk, sp, delta);
          worst_excess = std::max(worst_excess, sres.lower_bound - sres.energy);
          if (z == z_list.back() && delta == deltas.front())
            crack_jump_facets = std::max(crack_jump_facets, sres.jump_facets);
        }
      }
    rb.add("slicing_states", states);
    rb.add("slicing_worst_excess", worst_excess, 0.0, worst_excess <= 0.0);
    rb.add("crack_jump_facets", crack_jump_facets, 1.0, crack_jump_facets >= 1);
  } else {
    throw InputError("sweep-gamma: unknown mode " + mode);
  }
}

void job_quantize_check(const KeyValueConfig& cfg, std::uint64_t seed, RowBuilder& rb) {
  const int fields = cfg.get_int("fields", 1000);
  Rng rng(seed);
  std::uniform_int_distribution<int> mdist(1, 3), ndist(8, 40), dimdist(1, 2);
  std::uniform_real_distribution<double> epsdist(0.05, 1.5);
  int sup_viol = 0, tv_viol = 0, sqrtm_viol = 0, idem_viol = 0, comp_viol = 0;
  for (int f = 0; f < fields; ++f) {
    const int dim = dimdist(rng);
    const int m = mdist(rng);
    const int nx = ndist(rng);
    const int ny = dim == 2 ? ndist(rng) : 1;
    const double eps = epsdist(rng);
    DiscreteSBV u = random_field(dim, nx, ny, m, 1.0 / nx, rng());

    const std::vector<double> rho = select_rho(u, eps);
    DiscreteSBV ue = quantize(u, eps, rho);

    double worst = 0.0;
    for (int c = 0; c < u.cells(); ++c) {
      double d2 = 0.0;
      for (int k = 0; k < m; ++k) {
        const double d = u.values[c * m + k] - ue.values[c * m + k];
        d2 += d * d;
      }
      worst = std::max(worst, std::sqrt(d2));
    }
    if (worst > eps) ++sup_viol;
    for (int k = 0; k < m; ++k)
      if (ue.total_variation_comp(k) > u.total_variation_comp(k)) ++tv_viol;
    if (ue.total_variation() > std::sqrt(static_cast<double>(m)) * u.total_variation())
      ++sqrtm_viol;

    DiscreteSBV ue2 = quantize(ue, eps, rho);
    if (ue2.values != ue.values) ++idem_viol;

    // truncate-then-quantize measure bound
    const int k_level = 1;
    TruncationLadder ladder;
    DiscreteSBV trunc = truncate(u, k_level, ladder);
    DiscreteSBV tq = quantize(trunc, eps, select_rho(trunc, eps));
    int far = 0, tall = 0;
    for (int c = 0; c < u.cells(); ++c) {
      double d2 = 0.0, n2 = 0.0;
      for (int k = 0; k < m; ++k) {
        const double d = u.values[c * m + k] - tq.values[c * m + k];
        d2 += d * d;
        n2 += u.values[c * m + k] * u.values[c * m + k];
      }
      if (std::sqrt(d2) > eps) ++far;
      if (std::sqrt(n2) > ladder.a(k_level)) ++tall;
    }
    if (far > tall) ++comp_viol;
  }
  rb.add("fields", fields);
  rb.add("sup_bound_violations", sup_viol, 0.0, sup_viol == 0);
  rb.add("tv_violations", tv_viol, 0.0, tv_viol == 0);
  rb.add("sqrtm_violations", sqrtm_viol, 0.0, sqrtm_viol == 0);
  rb.add("idempotence_violations", idem_viol, 0.0, idem_viol == 0);
  rb.add("composition_violations", comp_viol, 0.0, comp_viol == 0);
}

void job_envelope_check(const KeyValueConfig& cfg, std::uint64_t, RowBuilder& rb) {
  const double q = cfg.get_double("q", 2.0);
  const SurfaceParams sp(cfg.get_double("p", 2.0), q, cfg.get_double("ell", 1.0));
  const BulkDensity density = BulkDensity::power(q);
  const int points = cfg.get_int("points", 4001);
  const double lo = cfg.get_double("lo", -3.0), hi = cfg.get_double("hi", 3.0);
  const std::vector<double> deltas = cfg.get_list("delta_seq", {0.5, 0.9, 0.99, 0.999});
  EnvelopeGrid1D grid = sample_grid(lo, hi, points, [](double) { return 0.0; });

  double prev = std::numeric_limits<double>::infinity();
  bool monotone = true;
  double final_err = 0.0;
  for (size_t k = 0; k < deltas.size(); ++k) {
    std::vector<double> prefix(deltas.begin(), deltas.begin() + k + 1);
    final_err = verify_hdelta_limit(density, sp, prefix, grid);
    rb.add("max_error_delta" + num_tag(deltas[k]), final_err);
    if (final_err > prev + 1e-12) monotone = false;
    prev = final_err;
  }
  const double tol = cfg.get_double("tol", 0.05);
  rb.add("max_error_final", final_err, tol, final_err <= tol);
  rb.add("error_monotone", monotone ? 1.0 : 0.0, 0.0, monotone);
  const std::string dump = cfg.get_string("csv_dump", "");
  if (!dump.empty()) {
    EnvelopeGrid1D psi = grid;
    for (size_t i = 0; i < grid.xs.size(); ++i) {
      Mat xi(1, 1);
      xi(0, 0) = grid.xs[i];
      psi.ys[i] = density.eval(xi);
    }
    convex_envelope_1d(psi).write_csv(dump);
  }
}

void job_projection_check(const KeyValueConfig& cfg, std::uint64_t seed, RowBuilder& rb) {
  const BulkDensity density = density_of(cfg);
  const RecessionDensity rec = recession(density);
  const int count = cfg.get_int("samples", 10000);
  const int m = density.kind() == DensityKind::PowerQ ? cfg.get_int("m", 2) : 2;
  const int n = density.kind() == DensityKind::PowerQ ? cfg.get_int("n", 2) : 2;
  auto samples = projection_samples(count, m, n, seed);
  if (m == 2 && n == 2) {
    // canonical witness family xi = diag(1, t), nu = e1
    Mat xi = Mat::Zero(2, 2);
    xi(0, 0) = 1.0;
    xi(1, 1) = 0.1;
    Vec nu = Vec::Zero(2);
    nu[0] = 1.0;
    samples.emplace_back(xi, nu);
  }
  ProjectionReport rep = check_projection_property(rec, samples);
  rb.add("holds", rep.holds ? 1.0 : 0.0, 0.0, rep.holds);
  rb.add("worst_violation", rep.worst_violation);
  if (rep.witness) {
    rb.add("witness_xi00", rep.witness->first(0, 0));
    rb.add("witness_xi11", rep.witness->first(1, 1));
    rb.add("witness_nu0", rep.witness->second[0]);
  }
}

void job_bv_test(const KeyValueConfig& cfg, std::uint64_t, RowBuilder& rb) {
  const std::string kind = cfg.get_string("g", "g0");
  const int cells = cfg.get_int("cells", 64);
  const double zval = cfg.get_double("z", 2.0);
  Vec z(1), nu(1);
  z[0] = zval;
  nu[0] = 1.0;

  SurfaceDensityFn g;
  if (kind == "g0") {
    G0Density g0(cfg.get_double("gamma", 0.5), cfg.get_double("ell", 1.0));
    g = [g0](const Vec& jump, const Vec&) { return g0(jump.norm()); };
  } else if (kind == "square") {
    g = [](const Vec& jump, const Vec&) { return jump.squaredNorm(); };
  } else {
    throw InputError("bv-test: unknown g kind " + kind);
  }

  int violations = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  const int splits = cfg.get_int("splits", 9);
  for (int i = 1; i <= splits; ++i) {
    const double theta = static_cast<double>(i) / (splits + 1);
    DiscreteSBV comp = split_competitor_1d(cells, z, theta);
    BvEllipticityResult r = bv_ellipticity_test(g, z, nu, comp);
    if (r.violated) ++violations;
    worst_margin = std::min(worst_margin, r.rhs - r.lhs);
  }
  rb.add("competitors", splits);
  rb.add("worst_margin", worst_margin);
  rb.add("violations", violations, 0.0, violations == 0);
}

}  // namespace

const std::vector<std::string>& known_subcommands() {
  static const std::vector<std::string> cmds = {"cell-density",   "g-scal",
                                                "sweep-gamma",    "exponent-fit",
                                                "quantize-check", "envelope-check",
                                                "projection-check", "bv-test"};
  return cmds;
}

JobOutcome run(const JobConfig& config) {
  JobOutcome out;
  RowBuilder rb;
  rb.subcommand = config.subcommand;
  KeyValueConfig echo_cfg = config.params;
  echo_cfg.set("seed", std::to_string(config.seed));
  rb.params = echo_cfg.echo();
  try {
    if (config.subcommand == "cell-density") job_cell_density(config.params, config.seed, rb);
    else if (config.subcommand == "g-scal") job_g_scal(config.params, config.seed, rb);
    else if (config.subcommand == "sweep-gamma") job_sweep_gamma(config.params, config.seed, rb);
    else if (config.subcommand == "exponent-fit") job_exponent_fit(config.params, config.seed, rb);
    else if (config.subcommand == "quantize-check")
      job_quantize_check(config.params, config.seed, rb);
    else if (config.subcommand == "envelope-check")
      job_envelope_check(config.params, config.seed, rb);
    else if (config.subcommand == "projection-check")
      job_projection_check(config.params, config.seed, rb);
    else if (config.subcommand == "bv-test") job_bv_test(config.params, config.seed, rb);
    else throw InputError("unknown subcommand: " + config.subcommand);
    out.rows = rb.rows;
    out.exit_code = rb.all_pass() ? kExitPass : kExitMetricFailure;
  } catch (const DivergenceError& e) {
    out.rows = rb.rows;
    out.rows.push_back({config.subcommand, rb.params, std::string("solver_error:") + e.what(),
                        0.0, 0.0, false, 0.0});
    out.exit_code = kExitSolver;
  } catch (const std::invalid_argument& e) {
    out.rows = rb.rows;
    out.rows.push_back({config.subcommand, rb.params, std::string("usage_error:") + e.what(),
                        0.0, 0.0, false, 0.0});
    out.exit_code = kExitUsage;
  }
  if (!config.out_csv.empty()) {
    CsvWriter writer(config.out_csv);
    for (const ResultRow& r : out.rows) writer.write_row(r);
  }
  return out;
}

int thread_count() {
  if (const char* env = std::getenv("COHESIVE_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

JobOutcome sweep(const std::vector<JobConfig>& configs, const std::string& out_csv) {
  JobOutcome merged;
  const int workers = std::max(1, thread_count());
  std::vector<std::future<JobOutcome>> futures(configs.size());
  size_t running = 0;
  std::vector<size_t> order;
  // Bounded fan-out: launch up to `workers` jobs, collect in config order.
  for (size_t i = 0; i < configs.size(); ++i) {
    while (running >= static_cast<size_t>(workers)) {
      futures[order.front()].wait();
      order.erase(order.begin());
      --running;
    }
    JobConfig job = configs[i];
    job.out_csv.clear();  // merged output only
    futures[i] = std::async(std::launch::async, [job] { return run(job); });
    order.push_back(i);
    ++running;
  }
  for (size_t i = 0; i < configs.size(); ++i) {
    JobOutcome o = futures[i].get();
    merged.exit_code = std::max(merged.exit_code, o.exit_code);
    merged.rows.insert(merged.rows.end(), o.rows.begin(), o.rows.end());
  }
  if (!out_csv.empty()) {
    CsvWriter writer(out_csv);
    for (const ResultRow& r : merged.rows) writer.write_row(r);
  }
  return merged;
}

}  // namespace cohesive
