#include "cohesive/phase_field.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "cohesive/lbfgs.hpp"
#include "cohesive/mollifier.hpp"
#include "cohesive/surface.hpp"

namespace cohesive {

namespace {

constexpr double kVClamp = 1e-12;

struct EnergyModel {
  const BulkDensity* bulk = nullptr;      // standard functional, f_eps^q coefficient
  const RecessionDensity* rec = nullptr;  // recession functional, min(M^{q-1}, eps^{q-1} f_p^q)
  const SurfaceParams* params = nullptr;
  double m_num = 1e12;
  double clamp = kVClamp;  // continuation clamp on the degradation argument
};

// Elastic coefficient and its v_c-derivative for either mode.
void elastic_coefficient(const EnergyModel& em, double v_c, double eps, double& coeff,
                         double& dcoeff) {
  const SurfaceParams& sp = *em.params;
  const double t = std::clamp(v_c, 0.0, 1.0 - em.clamp);
  const double fp = sp.degradation(t);
  if (em.rec) {
    const double thr = std::pow(em.m_num / eps, 1.0 / sp.qprime());
    if (fp >= thr) {
      coeff = std::pow(em.m_num, sp.q - 1.0);
      dcoeff = 0.0;
    } else {
      const double eq = std::pow(eps, sp.q - 1.0);
      coeff = eq * std::pow(fp, sp.q);
      dcoeff = v_c >= 1.0 - em.clamp
                   ? 0.0
                   : eq * sp.q * std::pow(fp, sp.q - 1.0) * sp.degradation_deriv(t);
    }
  } else {
    const double scale = std::pow(eps, 1.0 - 1.0 / sp.q);
    const double raw = scale * fp;
    if (raw >= 1.0 || v_c >= 1.0 - em.clamp) {
      coeff = raw >= 1.0 ? 1.0 : std::pow(raw, sp.q);
      dcoeff = 0.0;
    } else {
      coeff = std::pow(raw, sp.q);
      dcoeff = sp.q * std::pow(raw, sp.q - 1.0) * scale * sp.degradation_deriv(t);
    }
  }
}

double density_eval(const EnergyModel& em, const Mat& xi) {
  return em.rec ? em.rec->eval(xi) : em.bulk->eval(xi);
}

Mat density_grad(const EnergyModel& em, const Mat& xi) {
  return em.rec ? em.rec->grad(xi) : em.bulk->grad(xi);
}

// Crude diagonal curvature used to precondition the staggered half-steps;
// the gradient-term stiffness (~1/h^2) otherwise dominates the descent.
void pf_hessian_diag(const PhaseFieldState& s, const EnergyModel& em,
                     std::vector<double>* du_diag, std::vector<double>* dv_diag) {
  const SurfaceParams& sp = *em.params;
  const double q = sp.q, qp = sp.qprime(), kappa = sp.kappa();
  const double eps = s.eps;
  const double hn = std::pow(s.h, s.dim);
  const double eq1 = std::pow(eps, q - 1.0);
  if (du_diag) du_diag->assign(s.u.size(), 0.0);
  if (dv_diag) dv_diag->assign(s.v.size(), 0.0);
  const int corners = s.dim == 1 ? 2 : 4;
  const double inv_scale = s.dim == 1 ? 1.0 / s.h : 1.0 / (2.0 * s.h);
  auto visit = [&](const int* nodes) {
    double v_c = 0.0;
    for (int c = 0; c < corners; ++c) v_c += s.v[nodes[c]];
    v_c /= corners;
    double coeff, dcoeff;
    elastic_coefficient(em, v_c, eps, coeff, dcoeff);
    if (du_diag) {
      double gu2 = 0.0;
      for (int k = 0; k < s.m; ++k) {
        double gx = 0.0;
        for (int c = 0; c < corners; ++c) gx += (c % 2 ? 1 : -1) * s.u[nodes[c] * s.m + k];
        gu2 += gx * gx * inv_scale * inv_scale;
      }
      const double hpsi = q * std::max(q - 1.0, 1.0) *
                          (std::pow(std::max(std::sqrt(gu2), 1e-2), q - 2.0) + 1.0);
      const double da = (coeff + (em.bulk ? 0.0 : 0.0)) * hpsi * inv_scale * inv_scale * hn;
      for (int c = 0; c < corners; ++c)
        for (int k = 0; k < s.m; ++k) (*du_diag)[nodes[c] * s.m + k] += da;
    }
    if (dv_diag) {
      const double omv = std::max(1.0 - v_c, 1e-6);
      double db = qp * std::max(qp - 1.0, 0.5) * std::pow(omv, qp - 2.0) / (kappa * eps) * hn /
                  (corners * corners);
      db += eq1 * q * std::max(q - 1.0, 0.5) * inv_scale * inv_scale * hn;
      db += std::abs(dcoeff) * inv_scale * hn / corners;
      for (int c = 0; c < corners; ++c) (*dv_diag)[nodes[c]] += db;
    }
  };
  if (s.dim == 1) {
    for (int i = 0; i + 1 < s.nx; ++i) {
      const int nodes[2] = {i, i + 1};
      visit(nodes);
    }
  } else {
    for (int j = 0; j + 1 < s.ny; ++j)
      for (int i = 0; i + 1 < s.nx; ++i) {
        const int nodes[4] = {s.node_index(i, j), s.node_index(i + 1, j),
                              s.node_index(i, j + 1), s.node_index(i + 1, j + 1)};
        visit(nodes);
      }
  }
}

double pf_energy(const PhaseFieldState& s, const EnergyModel& em, const BoundaryCondition* bc,
                 const FidelityTerm* fid, std::vector<double>* du, std::vector<double>* dv) {
  const SurfaceParams& sp = *em.params;
  const double eps = s.eps;
  const double q = sp.q, qp = sp.qprime(), kappa = sp.kappa();
  const double hn = std::pow(s.h, s.dim);
  const double eq1 = std::pow(eps, q - 1.0);
  if (du) du->assign(s.u.size(), 0.0);
  if (dv) dv->assign(s.v.size(), 0.0);
  if (fid) {
    require(fid->r > 1.0, "FidelityTerm: r must be > 1");
    require(fid->w.size() == s.u.size(), "FidelityTerm: w shape mismatch");
    require(fid->eta_eps >= 0.0, "FidelityTerm: eta_eps must be >= 0");
  }

  double energy = 0.0;
  const int m = s.m;
  Mat gu(m, s.dim);
  Vec uc(m), wc(m);

  auto cell_term = [&](const int* nodes, int n_corners, double inv_scale /* 1/h or 1/(2h) */,
                       const int* sx, const int* sy) {
    // gradient of u
    for (int k = 0; k < m; ++k) {
      double gx = 0.0, gy = 0.0;
      for (int c = 0; c < n_corners; ++c) {
        gx += sx[c] * s.u[nodes[c] * m + k];
        gy += sy[c] * s.u[nodes[c] * m + k];
      }
      gu(k, 0) = gx * inv_scale;
      if (s.dim == 2) gu(k, 1) = gy * inv_scale;
    }
    double v_c = 0.0;
    for (int c = 0; c < n_corners; ++c) v_c += s.v[nodes[c]];
    v_c /= n_corners;
    double gvx = 0.0, gvy = 0.0;
    for (int c = 0; c < n_corners; ++c) {
      gvx += sx[c] * s.v[nodes[c]];
      gvy += sy[c] * s.v[nodes[c]];
    }
    gvx *= inv_scale;
    gvy *= inv_scale;

    double coeff, dcoeff;
    elastic_coefficient(em, v_c, eps, coeff, dcoeff);
    const double psi = density_eval(em, gu);
    energy += coeff * psi * hn;

    const double omv = 1.0 - v_c;
    energy += std::pow(omv, qp) / (kappa * eps) * hn;

    const double gv_norm = s.dim == 2 ? std::hypot(gvx, gvy) : std::abs(gvx);
    energy += eq1 * std::pow(gv_norm, q) * hn;

    if (du && psi != 0.0 && coeff != 0.0) {
      Mat G = density_grad(em, gu);
      for (int k = 0; k < m; ++k)
        for (int c = 0; c < n_corners; ++c) {
          double chain = sx[c] * G(k, 0);
          if (s.dim == 2) chain += sy[c] * G(k, 1);
          (*du)[nodes[c] * m + k] += coeff * chain * inv_scale * hn;
        }
    }
    if (dv) {
      const double dd = (dcoeff * psi - qp * std::pow(omv, qp - 1.0) / (kappa * eps)) * hn /
                        n_corners;
      for (int c = 0; c < n_corners; ++c) (*dv)[nodes[c]] += dd;
      if (gv_norm > 0.0) {
        const double f = eq1 * q * std::pow(gv_norm, q - 2.0) * hn;
        for (int c = 0; c < n_corners; ++c) {
          double chain = sx[c] * gvx;
          if (s.dim == 2) chain += sy[c] * gvy;
          (*dv)[nodes[c]] += f * chain * inv_scale;
        }
      }
    }

    if (fid) {
      if (fid->eta_eps > 0.0) {
        energy += fid->eta_eps * psi * hn;
        if (du && psi != 0.0) {
          Mat G = density_grad(em, gu);
          for (int k = 0; k < m; ++k)
            for (int c = 0; c < n_corners; ++c) {
              double chain = sx[c] * G(k, 0);
              if (s.dim == 2) chain += sy[c] * G(k, 1);
              (*du)[nodes[c] * m + k] += fid->eta_eps * chain * inv_scale * hn;
            }
        }
      }
      for (int k = 0; k < m; ++k) {
        double a = 0.0, b = 0.0;
        for (int c = 0; c < n_corners; ++c) {
          a += s.u[nodes[c] * m + k];
          b += fid->w[nodes[c] * m + k];
        }
        uc[k] = a / n_corners;
        wc[k] = b / n_corners;
      }
      const double dist = (uc - wc).norm();
      energy += std::pow(dist, fid->r) * hn;
      if (du && dist > 0.0) {
        const double f = fid->r * std::pow(dist, fid->r - 2.0) * hn / n_corners;
        for (int k = 0; k < m; ++k)
          for (int c = 0; c < n_corners; ++c)
            (*du)[nodes[c] * m + k] += f * (uc[k] - wc[k]);
      }
    }
  };

  if (s.dim == 1) {
    const int sx[2] = {-1, 1};
    const int sy[2] = {0, 0};
    for (int i = 0; i + 1 < s.nx; ++i) {
      const int nodes[2] = {i, i + 1};
      cell_term(nodes, 2, 1.0 / s.h, sx, sy);
    }
  } else {
    const int sx[4] = {-1, 1, -1, 1};
    const int sy[4] = {-1, -1, 1, 1};
    for (int j = 0; j + 1 < s.ny; ++j)
      for (int i = 0; i + 1 < s.nx; ++i) {
        const int nodes[4] = {s.node_index(i, j), s.node_index(i + 1, j),
                              s.node_index(i, j + 1), s.node_index(i + 1, j + 1)};
        cell_term(nodes, 4, 1.0 / (2.0 * s.h), sx, sy);
      }
  }

  if (bc) {
    if (du)
      for (size_t i = 0; i < bc->u_fixed.size(); ++i)
        if (bc->u_fixed[i]) (*du)[i] = 0.0;
    if (dv)
      for (size_t i = 0; i < bc->v_fixed.size(); ++i)
        if (bc->v_fixed[i]) (*dv)[i] = 0.0;
  }
  return energy;
}

}  // namespace

double PhaseFieldState::min_v() const {
  double mv = 1.0;
  for (double x : v) mv = std::min(mv, x);
  return mv;
}

void PhaseFieldState::validate() const {
  require(dim == 1 || dim == 2, "PhaseFieldState: dim must be 1 or 2");
  require(nx >= 2 && ny >= 1, "PhaseFieldState: need at least 2 nodes per axis");
  require(dim == 2 ? ny >= 2 : ny == 1, "PhaseFieldState: bad ny");
  require(h > 0.0 && eps > 0.0, "PhaseFieldState: h and eps must be > 0");
  require(m >= 1 && m <= 4, "PhaseFieldState: 1 <= m <= 4");
  require(static_cast<int>(u.size()) == nodes() * m, "PhaseFieldState: u size mismatch");
  require(static_cast<int>(v.size()) == nodes(), "PhaseFieldState: v size mismatch");
  for (double x : u) require_finite(x, "PhaseFieldState::u");
  for (double x : v) {
    require_finite(x, "PhaseFieldState::v");
    if (x < -1e-12 || x > 1.0 + 1e-12)
      throw InvariantError("PhaseFieldState: v outside [0,1]");
  }
}

PhaseFieldState PhaseFieldState::bar_1d(int n_nodes, double length, double eps, int m) {
  PhaseFieldState s;
  s.dim = 1;
  s.nx = n_nodes;
  s.ny = 1;
  s.h = length / (n_nodes - 1);
  s.m = m;
  s.eps = eps;
  s.u.assign(n_nodes * m, 0.0);
  s.v.assign(n_nodes, 1.0);
  return s;
}

PhaseFieldState PhaseFieldState::grid_2d(int n_nodes_per_axis, double side, double eps, int m) {
  PhaseFieldState s;
  s.dim = 2;
  s.nx = s.ny = n_nodes_per_axis;
  s.h = side / (n_nodes_per_axis - 1);
  s.m = m;
  s.eps = eps;
  s.origin_x = s.origin_y = -0.5 * side;
  s.u.assign(s.nodes() * m, 0.0);
  s.v.assign(s.nodes(), 1.0);
  return s;
}

void PhaseFieldState::write(const std::string& path) const {
  validate();
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw InputError("PhaseFieldState::write: cannot open " + path);
  std::fprintf(f,
               "cohesive-field v1\ndim %d\nshape %d %d\nh %.17g\neps %.17g\norigin %.17g "
               "%.17g\nm %d\nfields u v\ndata\n",
               dim, nx, ny, h, eps, origin_x, origin_y, m);
  std::fwrite(u.data(), sizeof(double), u.size(), f);
  std::fwrite(v.data(), sizeof(double), v.size(), f);
  std::fclose(f);
}

PhaseFieldState PhaseFieldState::read(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw InputError("PhaseFieldState::read: cannot open " + path);
  PhaseFieldState s;
  char ver[16] = {0};
  if (std::fscanf(f, "cohesive-field v%15s\n", ver) != 1 || std::strcmp(ver, "1") != 0) {
    std::fclose(f);
    throw InputError("PhaseFieldState::read: bad magic");
  }
  char line[64] = {0};
  int ok = std::fscanf(f, "dim %d\nshape %d %d\nh %lg\neps %lg\norigin %lg %lg\nm %d\n",
                       &s.dim, &s.nx, &s.ny, &s.h, &s.eps, &s.origin_x, &s.origin_y, &s.m);
  if (ok != 8 || !std::fgets(line, sizeof(line), f) ||
      std::strncmp(line, "fields", 6) != 0 || !std::fgets(line, sizeof(line), f) ||
      std::strncmp(line, "data", 4) != 0) {
    std::fclose(f);
    throw InputError("PhaseFieldState::read: bad header");
  }
  s.u.resize(s.nodes() * s.m);
  s.v.resize(s.nodes());
  size_t got = std::fread(s.u.data(), sizeof(double), s.u.size(), f);
  got += std::fread(s.v.data(), sizeof(double), s.v.size(), f);
  std::fclose(f);
  if (got != s.u.size() + s.v.size())
    throw InputError("PhaseFieldState::read: truncated payload");
  s.validate();
  return s;
}

BoundaryCondition BoundaryCondition::none(const PhaseFieldState& s) {
  BoundaryCondition bc;
  bc.u_fixed.assign(s.nodes() * s.m, 0);
  bc.u_value.assign(s.nodes() * s.m, 0.0);
  bc.v_fixed.assign(s.nodes(), 0);
  bc.v_value.assign(s.nodes(), 1.0);
  return bc;
}

BoundaryCondition BoundaryCondition::bar_ends(const PhaseFieldState& s, const Vec& z) {
  require(s.dim == 1, "bar_ends: 1D states only");
  require(static_cast<int>(z.size()) == s.m, "bar_ends: z size mismatch");
  BoundaryCondition bc = none(s);
  for (int k = 0; k < s.m; ++k) {
    bc.u_fixed[0 * s.m + k] = 1;
    bc.u_value[0 * s.m + k] = 0.0;
    bc.u_fixed[(s.nx - 1) * s.m + k] = 1;
    bc.u_value[(s.nx - 1) * s.m + k] = z[k];
  }
  return bc;
}

BoundaryCondition BoundaryCondition::mollified_jump(const PhaseFieldState& s, const Vec& z,
                                                    const Vec& nu, double width) {
  require(s.dim == 2, "mollified_jump: 2D states only");
  require(static_cast<int>(z.size()) == s.m, "mollified_jump: z size mismatch");
  require(nu.size() == 2, "mollified_jump: nu must be 2D");
  require(width > 0.0, "mollified_jump: width must be > 0");
  int axis = -1;
  for (int d = 0; d < 2; ++d)
    if (std::abs(std::abs(nu[d]) - 1.0) < 1e-12) axis = d;
  require(axis >= 0, "mollified_jump: nu must be axis-aligned (+-e1 or +-e2)");

  const MollifierMarginal& phi = MollifierMarginal::instance();
  BoundaryCondition bc = none(s);
  for (int j = 0; j < s.ny; ++j)
    for (int i = 0; i < s.nx; ++i) {
      const bool boundary = i == 0 || i == s.nx - 1 || j == 0 || j == s.ny - 1;
      if (!boundary) continue;
      const double t = (axis == 0 ? s.x_of(i) : s.y_of(j)) * nu[axis] / width;
      const int node = s.node_index(i, j);
      for (int k = 0; k < s.m; ++k) {
        bc.u_fixed[node * s.m + k] = 1;
        bc.u_value[node * s.m + k] = z[k] * phi.step(t);
      }
      bc.v_fixed[node] = 1;
      bc.v_value[node] = phi.plateau(t);
    }
  return bc;
}

void BoundaryCondition::check_shape(const PhaseFieldState& s) const {
  require(u_fixed.size() == s.u.size() && u_value.size() == s.u.size() &&
              v_fixed.size() == s.v.size() && v_value.size() == s.v.size(),
          "BoundaryCondition: shape mismatch with state");
}

void BoundaryCondition::apply(PhaseFieldState& s) const {
  check_shape(s);
  for (size_t i = 0; i < u_fixed.size(); ++i)
    if (u_fixed[i]) s.u[i] = u_value[i];
  for (size_t i = 0; i < v_fixed.size(); ++i)
    if (v_fixed[i]) s.v[i] = v_value[i];
}

double assemble_energy(const PhaseFieldState& state, const BulkDensity& density,
                       const SurfaceParams& params, const BoundaryCondition& bc,
                       const FidelityTerm* fidelity) {
  state.validate();
  bc.check_shape(state);
  EnergyModel em;
  em.bulk = &density;
  em.params = &params;
  return pf_energy(state, em, &bc, fidelity, nullptr, nullptr);
}

void energy_gradient(const PhaseFieldState& state, const BulkDensity& density,
                     const SurfaceParams& params, const BoundaryCondition& bc,
                     std::vector<double>& du, std::vector<double>& dv,
                     const FidelityTerm* fidelity) {
  state.validate();
  bc.check_shape(state);
  EnergyModel em;
  em.bulk = &density;
  em.params = &params;
  pf_energy(state, em, &bc, fidelity, &du, &dv);
}

namespace {

StaggeredResult staggered_impl(const PhaseFieldState& state0, const EnergyModel& em,
                               const BoundaryCondition& bc, const StaggeredOptions& opts,
                               const FidelityTerm* fid) {
  StaggeredResult res;
  res.state = state0;
  bc.apply(res.state);
  res.state.validate();
  PhaseFieldState& s = res.state;
  const double inf = std::numeric_limits<double>::infinity();

  LbfgsOptions lopts;
  lopts.max_iters = opts.inner_iters;
  lopts.grad_tol = opts.inner_grad_tol;
  lopts.f_tol = 1e-12;
  BoxLbfgs solver(lopts);

  double energy = pf_energy(s, em, &bc, fid, nullptr, nullptr);
  if (!std::isfinite(energy)) throw DivergenceError("staggered_minimize: non-finite energy");
  res.history.push_back(energy);

  // Bounds with pins for the constrained DOFs.
  std::vector<double> ulo(s.u.size(), -inf), uhi(s.u.size(), inf);
  for (size_t i = 0; i < s.u.size(); ++i)
    if (bc.u_fixed[i]) ulo[i] = uhi[i] = bc.u_value[i];
  std::vector<double> vlo(s.v.size(), 0.0), vhi(s.v.size(), 1.0);
  for (size_t i = 0; i < s.v.size(); ++i)
    if (bc.v_fixed[i]) vlo[i] = vhi[i] = bc.v_value[i];

  std::vector<double> grad_u(s.u.size()), grad_v(s.v.size());
  for (int outer = 0; outer < opts.outer_iters; ++outer) {
    const double e_start = energy;

    std::vector<double> xu = s.u;
    auto fu = [&](const std::vector<double>& x, std::vector<double>& g) {
      s.u = x;
      double e = pf_energy(s, em, &bc, fid, &grad_u, nullptr);
      g = grad_u;
      return e;
    };
    BoxLbfgs::DiagHessian pu = [&](const std::vector<double>& x, std::vector<double>& diag) {
      s.u = x;
      pf_hessian_diag(s, em, &diag, nullptr);
    };
    solver.minimize(fu, xu, ulo, uhi, nullptr, &pu);
    s.u = xu;
    energy = pf_energy(s, em, &bc, fid, nullptr, nullptr);
    res.history.push_back(energy);

    std::vector<double> xv = s.v;
    auto fv = [&](const std::vector<double>& x, std::vector<double>& g) {
      s.v = x;
      double e = pf_energy(s, em, &bc, fid, nullptr, &grad_v);
      g = grad_v;
      return e;
    };
    BoxLbfgs::DiagHessian pv = [&](const std::vector<double>& x, std::vector<double>& diag) {
      s.v = x;
      pf_hessian_diag(s, em, nullptr, &diag);
    };
    solver.minimize(fv, xv, vlo, vhi, nullptr, &pv);
    s.v = xv;
    energy = pf_energy(s, em, &bc, fid, nullptr, nullptr);
    res.history.push_back(energy);

    res.outer_iterations = outer + 1;
    if (!std::isfinite(energy))
      throw DivergenceError("staggered_minimize: non-finite energy during iteration");
    if (e_start - energy <= opts.energy_tol * std::max(1.0, std::abs(energy))) {
      res.converged = true;
      break;
    }
  }
  res.energy = energy;
  return res;
}

}  // namespace

StaggeredResult staggered_minimize(const PhaseFieldState& state0, const BulkDensity& density,
                                   const SurfaceParams& params, const BoundaryCondition& bc,
                                   const StaggeredOptions& opts, const FidelityTerm* fidelity) {
  EnergyModel em;
  em.bulk = &density;
  em.params = &params;
  return staggered_impl(state0, em, bc, opts, fidelity);
}

CellProblem2dResult cell_energy_2d(const Vec& z, const Vec& nu, double T, double h,
                                   const RecessionDensity& psi_inf, const SurfaceParams& params,
                                   const StaggeredOptions& opts, double m_num) {
  require(T > 0.0 && h > 0.0 && h < T, "cell_energy_2d: bad T or h");
  const int n = std::max(3, static_cast<int>(std::lround(T / h)) + 1);
  PhaseFieldState s = PhaseFieldState::grid_2d(n, T, 1.0, static_cast<int>(z.size()));
  BoundaryCondition bc = BoundaryCondition::mollified_jump(s, z, nu, 1.0);

  // Initialize with the optimal 1D slice profile extended along the jump
  // plane; the mollified-step data alone leaves a wide degenerate v = 0 band
  // that the alternation contracts only at a useless pace.
  const int axis = std::abs(std::abs(nu[0]) - 1.0) < 1e-12 ? 0 : 1;
  {
    CellSolveOptions copts;
    copts.t_schedule = {T};
    copts.nodes_per_unit = std::max(4.0 / h, 100.0);
    GEstimate slice = estimate_g(z, nu, psi_inf, params, copts);
    const Profile& prof = slice.profile;
    auto sample = [&](double t, double* alpha_out, double* beta_out) {
      const double pos = std::clamp((t + 0.5 * T) / prof.dt(), 0.0, prof.N - 1.0);
      const int j = std::min(static_cast<int>(pos), prof.N - 2);
      const double w = pos - j;
      for (int k = 0; k < prof.m; ++k)
        alpha_out[k] = (1.0 - w) * prof.alpha[j * prof.m + k] +
                       w * prof.alpha[(j + 1) * prof.m + k];
      *beta_out = (1.0 - w) * prof.beta[j] + w * prof.beta[j + 1];
    };
    std::vector<double> a(s.m);
    for (int j = 0; j < s.ny; ++j)
      for (int i = 0; i < s.nx; ++i) {
        const double t = (axis == 0 ? s.x_of(i) : s.y_of(j)) * nu[axis];
        double beta;
        sample(t, a.data(), &beta);
        const int node = s.node_index(i, j);
        for (int k = 0; k < s.m; ++k) s.u[node * s.m + k] = a[k];
        s.v[node] = beta;
      }
  }

  EnergyModel em;
  em.rec = &psi_inf;
  em.params = &params;
  em.m_num = m_num;

  // Clamp continuation, as in the 1D cell solver: the recession coefficient
  // is unbounded near v = 1 and needs loose stages first. A joint (u, v)
  // polish follows; pure alternation relaxes the boundary layers only at a
  // diffusive pace.
  StaggeredResult r;
  int stage = 0;
  for (double clamp : {1e-2, 1e-3, kVClamp}) {
    em.clamp = clamp;
    StaggeredOptions stage_opts = opts;
    if (stage++ < 2) stage_opts.outer_iters = std::max(5, opts.outer_iters / 6);
    r = staggered_impl(s, em, bc, stage_opts, nullptr);
    s = r.state;
  }
  {
    const size_t nu_dof = s.u.size(), nv_dof = s.v.size();
    std::vector<double> xj(nu_dof + nv_dof), lo(nu_dof + nv_dof), hi(nu_dof + nv_dof);
    std::copy(s.u.begin(), s.u.end(), xj.begin());
    std::copy(s.v.begin(), s.v.end(), xj.begin() + nu_dof);
    const double inf = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < nu_dof; ++i) {
      lo[i] = bc.u_fixed[i] ? bc.u_value[i] : -inf;
      hi[i] = bc.u_fixed[i] ? bc.u_value[i] : inf;
    }
    for (size_t i = 0; i < nv_dof; ++i) {
      lo[nu_dof + i] = bc.v_fixed[i] ? bc.v_value[i] : 0.0;
      hi[nu_dof + i] = bc.v_fixed[i] ? bc.v_value[i] : 1.0;
    }
    std::vector<double> du, dv;
    auto fj = [&](const std::vector<double>& x, std::vector<double>& g) {
      std::copy(x.begin(), x.begin() + nu_dof, s.u.begin());
      std::copy(x.begin() + nu_dof, x.end(), s.v.begin());
      const double e = pf_energy(s, em, &bc, nullptr, &du, &dv);
      std::copy(du.begin(), du.end(), g.begin());
      std::copy(dv.begin(), dv.end(), g.begin() + nu_dof);
      return e;
    };
    BoxLbfgs::DiagHessian pj = [&](const std::vector<double>& x, std::vector<double>& diag) {
      std::copy(x.begin(), x.begin() + nu_dof, s.u.begin());
      std::copy(x.begin() + nu_dof, x.end(), s.v.begin());
      pf_hessian_diag(s, em, &du, &dv);
      std::copy(du.begin(), du.end(), diag.begin());
      std::copy(dv.begin(), dv.end(), diag.begin() + nu_dof);
    };
    LbfgsOptions lopts;
    lopts.max_iters = 40 * opts.inner_iters / 10;
    lopts.grad_tol = opts.inner_grad_tol;
    lopts.f_tol = 1e-12;
    std::vector<double> hist;
    BoxLbfgs solver(lopts);
    solver.minimize(fj, xj, lo, hi, &hist, &pj);
    std::copy(xj.begin(), xj.begin() + nu_dof, s.u.begin());
    std::copy(xj.begin() + nu_dof, xj.end(), s.v.begin());
    r.energy = pf_energy(s, em, &bc, nullptr, nullptr, nullptr);
    r.history.insert(r.history.end(), hist.begin(), hist.end());
    r.state = s;
  }

  CellProblem2dResult out;
  out.value = r.energy;
  out.value_per_area = r.energy / T;  // n = 2
  out.state = std::move(r.state);
  out.history = std::move(r.history);
  out.converged = r.converged;
  return out;
}

SbvThresholdResult slicing_lower_bound(const PhaseFieldState& state, const BulkDensity& density,
                                       const SurfaceParams& params, double delta) {
  require(delta > 0.0 && delta < 1.0, "slicing_lower_bound: delta outside (0,1)");
  state.validate();
  const double qp = params.qprime();
  auto Phi = [](double t) { return t - 0.5 * t * t; };
  const double lo = Phi(std::pow(delta, qp)), hi = Phi(delta);

  std::vector<double> phi_v(state.nodes());
  for (int i = 0; i < state.nodes(); ++i) phi_v[i] = Phi(state.v[i]);

  // Candidate thresholds: midpoints between consecutive distinct nodal values
  // inside (lo, hi), plus the interval midpoint.
  std::vector<double> inside;
  for (double t : phi_v)
    if (t > lo && t < hi) inside.push_back(t);
  std::sort(inside.begin(), inside.end());
  inside.erase(std::unique(inside.begin(), inside.end()), inside.end());
  std::vector<double> candidates;
  candidates.push_back(0.5 * (lo + hi));
  for (size_t i = 0; i + 1 < inside.size(); ++i)
    candidates.push_back(0.5 * (inside[i] + inside[i + 1]));
  if (!inside.empty()) {
    candidates.push_back(0.5 * (lo + inside.front()));
    candidates.push_back(0.5 * (inside.back() + hi));
  }

  const double facet_weight = state.dim == 2 ? state.h : 1.0;
  auto perimeter_of = [&](double t) {
    int crossings = 0;
    for (int j = 0; j < state.ny; ++j)
      for (int i = 0; i + 1 < state.nx; ++i)
        if ((phi_v[state.node_index(i, j)] > t) != (phi_v[state.node_index(i + 1, j)] > t))
          ++crossings;
    if (state.dim == 2)
      for (int j = 0; j + 1 < state.ny; ++j)
        for (int i = 0; i < state.nx; ++i)
          if ((phi_v[state.node_index(i, j)] > t) != (phi_v[state.node_index(i, j + 1)] > t))
            ++crossings;
    return crossings * facet_weight;
  };

  double tbar = candidates.front(), best_per = perimeter_of(candidates.front());
  for (double c : candidates) {
    const double per = perimeter_of(c);
    if (per < best_per) {
      best_per = per;
      tbar = c;
    }
  }

  SbvThresholdResult res;
  res.delta = delta;
  res.tbar = tbar;
  res.perimeter = best_per;

  // Thresholded field on the node lattice, facets crossing the cut are jumps.
  std::vector<double> vals(state.u.size());
  std::vector<char> pass(state.nodes());
  for (int i = 0; i < state.nodes(); ++i) {
    pass[i] = phi_v[i] > tbar ? 1 : 0;
    for (int k = 0; k < state.m; ++k)
      vals[i * state.m + k] = pass[i] ? state.u[i * state.m + k] : 0.0;
  }
  DiscreteSBV ubar = DiscreteSBV::from_cells(state.dim, state.nx, state.ny, state.m, state.h,
                                             std::move(vals),
                                             std::numeric_limits<double>::infinity());
  int jump_facets = 0;
  for (int j = 0; j < state.ny; ++j)
    for (int i = 0; i + 1 < state.nx; ++i)
      if (pass[state.node_index(i, j)] != pass[state.node_index(i + 1, j)]) {
        ubar.x_facets[j * (state.nx - 1) + i] = FacetClass::Jump;
        ++jump_facets;
      }
  if (state.dim == 2)
    for (int j = 0; j + 1 < state.ny; ++j)
      for (int i = 0; i < state.nx; ++i)
        if (pass[state.node_index(i, j)] != pass[state.node_index(i, j + 1)]) {
          ubar.y_facets[j * state.nx + i] = FacetClass::Jump;
          ++jump_facets;
        }
  res.jump_facets = jump_facets;

  // Bulk sum over cells fully inside the pass set, measure of {v_c <= delta}.
  const double hn = std::pow(state.h, state.dim);
  Mat gu(state.m, state.dim);
  double bulk = 0.0, low_measure = 0.0;
  auto cell_visit = [&](const int* nodes, int n_corners, double inv_scale, const int* sx,
                        const int* sy) {
    double v_c = 0.0;
    bool all_pass = true;
    for (int c = 0; c < n_corners; ++c) {
      v_c += state.v[nodes[c]];
      all_pass = all_pass && pass[nodes[c]];
    }
    v_c /= n_corners;
    if (v_c <= delta) low_measure += hn;
    if (!all_pass) return;
    for (int k = 0; k < state.m; ++k) {
      double gx = 0.0, gy = 0.0;
      for (int c = 0; c < n_corners; ++c) {
        gx += sx[c] * state.u[nodes[c] * state.m + k];
        gy += sy[c] * state.u[nodes[c] * state.m + k];
      }
      gu(k, 0) = gx * inv_scale;
      if (state.dim == 2) gu(k, 1) = gy * inv_scale;
    }
    bulk += hdelta(density, params, delta, gu) * hn;
  };
  if (state.dim == 1) {
    const int sx[2] = {-1, 1}, sy[2] = {0, 0};
    for (int i = 0; i + 1 < state.nx; ++i) {
      const int nodes[2] = {i, i + 1};
      cell_visit(nodes, 2, 1.0 / state.h, sx, sy);
    }
  } else {
    const int sx[4] = {-1, 1, -1, 1}, sy[4] = {-1, -1, 1, 1};
    for (int j = 0; j + 1 < state.ny; ++j)
      for (int i = 0; i + 1 < state.nx; ++i) {
        const int nodes[4] = {state.node_index(i, j), state.node_index(i + 1, j),
                              state.node_index(i, j + 1), state.node_index(i + 1, j + 1)};
        cell_visit(nodes, 4, 1.0 / (2.0 * state.h), sx, sy);
      }
  }

  const double beta_delta = std::pow(1.0 - std::pow(delta, qp), 1.0 / qp) * (hi - lo);
  Mat zero = Mat::Zero(state.m, state.dim);
  const double h0 = hdelta(density, params, delta, zero);
  res.lower_bound =
      std::pow(delta, qp + 1.0) * bulk + beta_delta * best_per - h0 * low_measure;

  BoundaryCondition bc = BoundaryCondition::none(state);
  res.energy = assemble_energy(state, density, params, bc);
  if (res.lower_bound > res.energy + 1e-9 * std::max(1.0, std::abs(res.energy)))
    throw InvariantError("slicing_lower_bound: bound exceeds the energy");
  res.ubar = std::move(ubar);
  return res;
}

namespace {

PhaseFieldState interp_to(const PhaseFieldState& from, int n_nodes, double eps) {
  PhaseFieldState s = PhaseFieldState::bar_1d(n_nodes, from.h * (from.nx - 1), eps, from.m);
  for (int i = 0; i < n_nodes; ++i) {
    const double t = static_cast<double>(i) / (n_nodes - 1) * (from.nx - 1);
    const int j = std::min(static_cast<int>(t), from.nx - 2);
    const double w = t - j;
    s.v[i] = (1.0 - w) * from.v[j] + w * from.v[j + 1];
    for (int k = 0; k < from.m; ++k)
      s.u[i * from.m + k] =
          (1.0 - w) * from.u[j * from.m + k] + w * from.u[(j + 1) * from.m + k];
  }
  return s;
}

}  // namespace

GammaSweepResult gamma_sweep(double L, double z, const BulkDensity& density,
                             const SurfaceParams& params, const std::vector<double>& eps_list,
                             double h_over_eps, const StaggeredOptions& opts) {
  require(!eps_list.empty(), "gamma_sweep: empty eps list");
  for (size_t i = 0; i + 1 < eps_list.size(); ++i)
    require(eps_list[i] > eps_list[i + 1], "gamma_sweep: eps list must be decreasing");
  require(h_over_eps > 0.0 && h_over_eps <= 0.25 + 1e-12,
          "gamma_sweep: need h <= eps/4 per run");

  GammaSweepResult out;
  {
    Mat slope(1, 1);
    slope(0, 0) = z / L;
    out.elastic_ref = density.eval(slope) * L;
    out.crack_ref = g_scal(std::abs(z), params).value;
    out.limit_ref = std::min(out.elastic_ref, out.crack_ref);
  }

  Vec zv(1);
  zv[0] = z;
  std::optional<PhaseFieldState> prev;
  for (double eps : eps_list) {
    const int n = std::max(5, static_cast<int>(std::lround(L / (eps * h_over_eps))) + 1);
    std::vector<PhaseFieldState> inits;
    if (prev) inits.push_back(interp_to(*prev, n, eps));
    // elastic: linear ramp, undamaged
    PhaseFieldState el = PhaseFieldState::bar_1d(n, L, eps, 1);
    for (int i = 0; i < n; ++i) el.u[i] = z * i / (n - 1);
    inits.push_back(el);
    // crack: smoothed step with a v-notch at the center
    PhaseFieldState cr = PhaseFieldState::bar_1d(n, L, eps, 1);
    for (int i = 0; i < n; ++i) {
      const double x = i * cr.h - 0.5 * L;
      cr.u[i] = x < -eps ? 0.0 : (x > eps ? z : z * (x + eps) / (2.0 * eps));
      cr.v[i] = std::min(1.0, std::abs(x) / (2.0 * eps));
    }
    inits.push_back(cr);

    GammaSweepRow row;
    row.eps = eps;
    row.h = L / (n - 1);
    double best = std::numeric_limits<double>::infinity();
    PhaseFieldState best_state;
    for (const PhaseFieldState& init : inits) {
      BoundaryCondition bc = BoundaryCondition::bar_ends(init, zv);
      try {
        StaggeredResult r = staggered_minimize(init, density, params, bc, opts);
        row.iterations += r.outer_iterations;
        if (r.energy < best) {
          best = r.energy;
          best_state = r.state;
        }
      } catch (const DivergenceError&) {
        row.solver_ok = false;
      }
    }
    row.energy = best;
    row.min_v = best_state.min_v();
    row.jump_indicator = row.min_v < 0.5;
    out.rows.push_back(row);
    prev = best_state;
    out.final_state = std::move(best_state);
  }
  return out;
}

double crossover_jump(double L, const BulkDensity& density, const SurfaceParams& params,
                      double lo, double hi, int iters) {
  auto excess = [&](double z) {
    Mat slope(1, 1);
    slope(0, 0) = z / L;
    return density.eval(slope) * L - g_scal(z, params, 1500).value;
  };
  double flo = excess(lo), fhi = excess(hi);
  require(flo < 0.0 && fhi > 0.0, "crossover_jump: bracket does not straddle the crossover");
  for (int i = 0; i < iters; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (excess(mid) < 0.0) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace cohesive
