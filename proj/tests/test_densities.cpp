#include <doctest.h>

#include <cmath>

#include "cohesive/densities.hpp"
#include "cohesive/surface_params.hpp"
#include "oracles.hpp"

using namespace cohesive;

namespace {

Mat mat2(double a, double b, double c, double d) {
  Mat m(2, 2);
  m << a, b, c, d;
  return m;
}

Mat rotation(double angle) {
  return mat2(std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle));
}

}  // namespace

TEST_CASE("bulk density evaluation") {
  BulkDensity pw = BulkDensity::power(2.0);
  Mat zero = Mat::Zero(1, 1);
  CHECK(pw.eval(zero) == 0.0);

  BulkDensity plus = BulkDensity::compressible_plus(1.0);
  CHECK(plus.eval(mat2(1, 0, 0, 1)) == 0.0);
  // |2 Id|^2 = 8, det = 4: (8-2)^2 + (4-1)^2 = 45
  CHECK(plus.eval(mat2(2, 0, 0, 2)) == doctest::Approx(45.0));

  BulkDensity hat = BulkDensity::compressible_hat(1.0);
  CHECK(hat.eval(mat2(1, 0, 0, 1)) == 0.0);
}

TEST_CASE("bulk density input validation") {
  BulkDensity plus = BulkDensity::compressible_plus(1.0);
  CHECK_THROWS_AS(plus.eval(Mat::Zero(1, 1)), ShapeError);
  Mat bad = mat2(1, 0, 0, std::numeric_limits<double>::quiet_NaN());
  CHECK_THROWS_AS(plus.eval(bad), InputError);
  CHECK_THROWS_AS(BulkDensity::power(1.0), InputError);
  CHECK_THROWS_AS(BulkDensity::from_config("nonsense", 2.0, 0.0), InputError);
}

TEST_CASE("compressible densities vanish on sampled rotations") {
  BulkDensity plus = BulkDensity::compressible_plus(1.0);
  BulkDensity hat = BulkDensity::compressible_hat(0.5);
  for (int i = 0; i < 32; ++i) {
    const double angle = i * 0.196349;
    CHECK(plus.eval(rotation(angle)) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(hat.eval(rotation(angle)) == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("growth bounds hold with the estimated constant") {
  for (BulkDensity density :
       {BulkDensity::compressible_plus(1.0), BulkDensity::compressible_hat(2.0)}) {
    const double c = density.growth_constant();
    Rng rng(11);
    for (int i = 0; i < 500; ++i) {
      Mat xi = random_matrix(rng, 2, 2, -5.0, 5.0);
      const double nq = std::pow(xi.norm(), density.q());
      const double psi = density.eval(xi);
      CHECK(psi <= c * (nq + 1.0) + 1e-12);
      CHECK(psi >= std::max(nq / c - c, 0.0) - 1e-12);
    }
  }
}

TEST_CASE("analytic gradients match central differences") {
  struct Case {
    BulkDensity density;
    int m, n;
  };
  const Case cases[] = {
      {BulkDensity::power(2.0), 1, 1},
      {BulkDensity::power(1.5), 2, 2},
      {BulkDensity::power(3.0), 2, 1},
      {BulkDensity::compressible_plus(1.0), 2, 2},
      {BulkDensity::compressible_hat(1.0), 2, 2},
  };
  for (const Case& c : cases) {
    Rng rng(42);
    for (int trial = 0; trial < 100; ++trial) {
      Mat xi = random_matrix(rng, c.m, c.n, -2.0, 2.0);
      if (xi.norm() < 0.1) continue;
      std::uniform_real_distribution<double> mag(0.1, 10.0);
      xi *= mag(rng) / xi.norm();
      const Mat g = c.density.grad(xi);
      std::vector<double> xv(xi.data(), xi.data() + c.m * c.n);
      auto f = [&](const std::vector<double>& v) {
        Mat mm = Eigen::Map<const Eigen::MatrixXd>(v.data(), c.m, c.n);
        return c.density.eval(Mat(mm));
      };
      const std::vector<double> fd = oracles::fd_gradient(f, xv, 1e-6 * std::max(1.0, xi.norm()));
      std::vector<double> ga(g.data(), g.data() + c.m * c.n);
      CHECK(oracles::rel_error(ga, fd) <= 1e-5);
    }
  }
}

TEST_CASE("power gradient special values") {
  BulkDensity p2 = BulkDensity::power(2.0);
  Rng rng(3);
  Mat xi = random_matrix(rng, 2, 2, -3.0, 3.0);
  CHECK((p2.grad(xi) - 2.0 * xi).norm() == doctest::Approx(0.0));
  BulkDensity p4 = BulkDensity::power(4.0);
  CHECK(p4.grad(Mat::Zero(2, 2)).norm() == 0.0);
  // subgradient selection at the origin for 1 < q < 2
  CHECK(BulkDensity::power(1.5).grad(Mat::Zero(1, 1)).norm() == 0.0);
}

TEST_CASE("recession closed forms and homogeneity") {
  RecessionDensity rp = recession(BulkDensity::power(2.0));
  Mat xi = mat2(1, 2, 3, 4);
  CHECK(rp.eval(xi) == doctest::Approx(xi.squaredNorm()));
  CHECK(rp.eval(Mat::Zero(2, 2)) == 0.0);

  RecessionDensity rplus = recession(BulkDensity::compressible_plus(1.0));
  // |Id|^4 + alpha (det Id)^2 = 4 + 1
  CHECK(rplus.eval(mat2(1, 0, 0, 1)) == doctest::Approx(5.0));

  for (const BulkDensity& density :
       {BulkDensity::power(2.0), BulkDensity::compressible_plus(1.0),
        BulkDensity::compressible_hat(1.0)}) {
    RecessionDensity rec = recession(density);
    const int mn = density.kind() == DensityKind::PowerQ ? 1 : 2;
    Rng rng(5);
    for (int i = 0; i < 100; ++i) {
      Mat m = random_matrix(rng, mn, mn, -2.0, 2.0);
      const double base = rec.eval(m);
      for (double t : {0.5, 2.0, 7.0}) {
        const double scaled = rec.eval(Mat(t * m));
        CHECK(scaled == doctest::Approx(std::pow(t, density.q()) * base).epsilon(1e-12));
      }
    }
    CHECK(rec.self_check() <= 1e-2);
  }
}

TEST_CASE("recession numeric limit at t = 1e3") {
  BulkDensity plus = BulkDensity::compressible_plus(1.0);
  const double t = 1e3;
  const double ratio = plus.eval(mat2(t, 0, 0, t)) / std::pow(t, 4.0);
  CHECK(std::abs(ratio - 5.0) <= 1e-2);
}

TEST_CASE("recession gradients match central differences") {
  for (const BulkDensity& density :
       {BulkDensity::power(3.0), BulkDensity::compressible_plus(1.0),
        BulkDensity::compressible_hat(0.7)}) {
    RecessionDensity rec = recession(density);
    const int mn = density.kind() == DensityKind::PowerQ ? 2 : 2;
    Rng rng(19);
    for (int i = 0; i < 50; ++i) {
      Mat xi = random_matrix(rng, mn, mn, -2.0, 2.0);
      if (xi.norm() < 0.1) continue;
      Mat g = rec.grad(xi);
      std::vector<double> xv(xi.data(), xi.data() + mn * mn);
      auto f = [&](const std::vector<double>& v) {
        Mat mm = Eigen::Map<const Eigen::MatrixXd>(v.data(), mn, mn);
        return rec.eval(Mat(mm));
      };
      const std::vector<double> fd = oracles::fd_gradient(f, xv);
      std::vector<double> ga(g.data(), g.data() + mn * mn);
      CHECK(oracles::rel_error(ga, fd) <= 1e-5);
    }
  }
}

TEST_CASE("projection property checker") {
  RecessionDensity rplus = recession(BulkDensity::compressible_plus(1.0));
  ProjectionReport rep = check_projection_property(rplus, projection_samples(10000, 2, 2, 99));
  CHECK(rep.holds);
  CHECK(rep.worst_violation >= -1e-9);

  RecessionDensity rpow = recession(BulkDensity::power(2.0));
  ProjectionReport rep_pow =
      check_projection_property(rpow, projection_samples(2000, 2, 2, 100));
  CHECK(rep_pow.holds);
  CHECK(rep_pow.worst_violation >= 0.0);

  RecessionDensity rhat = recession(BulkDensity::compressible_hat(1.0));
  // the witness family xi = diag(1, t), nu = e1:
  // psi_inf(xi) = (1.01 - 0.2)^2 + 0.01 = 0.6661 < psi_inf(diag(1, 0)) = 1
  Mat xi = mat2(1, 0, 0, 0.1);
  Vec nu = Vec::Zero(2);
  nu[0] = 1.0;
  ProjectionReport rep_hat = check_projection_property(rhat, {{xi, nu}});
  CHECK_FALSE(rep_hat.holds);
  CHECK(rep_hat.worst_violation == doctest::Approx(0.6661 - 1.0).epsilon(1e-10));
  CHECK(rep_hat.worst_violation <= -0.3);
  CHECK(rep_hat.witness.has_value());

  Vec bad_nu = Vec::Zero(2);
  bad_nu[0] = 1.5;
  CHECK_THROWS_AS(check_projection_property(rhat, {{xi, bad_nu}}), InputError);
}

TEST_CASE("hdelta approximation") {
  BulkDensity pw = BulkDensity::power(2.0);
  SurfaceParams sp(2.0, 2.0, 1.0);

  CHECK(hdelta_scalar(pw, sp, 0.5, 0.0) == 0.0);
  CHECK_THROWS_AS(hdelta_scalar(pw, sp, 0.0, 1.0), InputError);
  CHECK_THROWS_AS(hdelta_scalar(pw, sp, 1.0, 1.0), InputError);

  // delta with 1/(1 - delta^2) = 4: h = min(x^2, 4|x|)
  const double delta = std::sqrt(3.0) / 2.0;
  CHECK(hdelta_scalar(pw, sp, delta, 3.0) == doctest::Approx(9.0));
  CHECK(hdelta_scalar(pw, sp, delta, 5.0) == doctest::Approx(20.0));

  // monotone in delta, dominated by Psi
  Rng rng(7);
  std::uniform_real_distribution<double> xd(-5.0, 5.0);
  for (int i = 0; i < 200; ++i) {
    const double x = xd(rng);
    double prev = 0.0;
    for (double d : {0.1, 0.3, 0.6, 0.9, 0.99}) {
      const double h = hdelta_scalar(pw, sp, d, x);
      CHECK(h >= prev - 1e-12);
      CHECK(h <= x * x + 1e-12);
      prev = h;
    }
  }
}
