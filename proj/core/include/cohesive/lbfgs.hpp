#pragma once

#include <functional>
#include <limits>
#include <vector>

namespace cohesive {

struct LbfgsOptions {
  int max_iters = 2000;
  double grad_tol = 1e-9;      // sup norm of the projected gradient
  double f_tol = 0.0;          // stall stop: relative decrease over a 25-iteration window
  int memory = 10;
  int max_line_search = 50;
  double armijo_c1 = 1e-4;
};

struct LbfgsResult {
  double value = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  double kkt_residual = std::numeric_limits<double>::infinity();
  bool converged = false;
  bool hit_iteration_cap = false;
};

// Box-constrained L-BFGS with projected Armijo backtracking. The objective
// callback fills `grad` and returns the value; it must be deterministic.
// Bounds may be +-inf; a fixed variable is expressed as lo == hi. Accepted
// steps never increase the objective.
//
// An optional diagonal preconditioner supplies curvature estimates at the
// current iterate; grid functionals whose stiffness spans many orders of
// magnitude (gradient terms ~1/h vs potential terms ~h) need it to make
// progress in a useful number of iterations.
class BoxLbfgs {
 public:
  using Objective = std::function<double(const std::vector<double>& x, std::vector<double>& grad)>;
  using DiagHessian = std::function<void(const std::vector<double>& x, std::vector<double>& diag)>;

  explicit BoxLbfgs(LbfgsOptions opts = {}) : opts_(opts) {}

  LbfgsResult minimize(const Objective& f, std::vector<double>& x,
                       const std::vector<double>& lo, const std::vector<double>& hi,
                       std::vector<double>* energy_history = nullptr,
                       const DiagHessian* precond = nullptr) const;

 private:
  LbfgsOptions opts_;
};

}  // namespace cohesive
