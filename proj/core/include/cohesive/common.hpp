#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace cohesive {

// Small dense matrices up to 4x4, stack-allocated. Fields on grids use flat
// std::vector<double> instead.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 4, 4>;
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 4, 1>;

struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct InvariantError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InputError(msg);
}

inline void require_finite(double x, const std::string& what) {
  if (!std::isfinite(x)) throw InputError(what + ": non-finite value");
}

inline void require_finite(const Mat& m, const std::string& what) {
  if (!m.allFinite()) throw InputError(what + ": non-finite entry");
}

// All stochastic sampling in the library goes through explicitly seeded
// engines so reruns are bitwise reproducible.
using Rng = std::mt19937_64;

inline Mat random_matrix(Rng& rng, int rows, int cols, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

inline Vec random_unit_vector(Rng& rng, int n) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Vec v(n);
  double norm2 = 0;
  do {
    for (int i = 0; i < n; ++i) v[i] = dist(rng);
    norm2 = v.squaredNorm();
  } while (norm2 < 1e-12);
  return v / std::sqrt(norm2);
}

// sign(x)*|x|^(e-1)*e, the derivative of |x|^e for e > 1; zero at x = 0.
inline double dpow_abs(double x, double e) {
  if (x == 0.0) return 0.0;
  return e * std::pow(std::abs(x), e - 1.0) * (x > 0 ? 1.0 : -1.0);
}

}  // namespace cohesive
