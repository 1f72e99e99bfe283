#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "cohesive/sbv.hpp"

using namespace cohesive;

namespace {

double sup_deviation(const DiscreteSBV& a, const DiscreteSBV& b) {
  double worst = 0.0;
  for (int c = 0; c < a.cells(); ++c) {
    double d2 = 0.0;
    for (int k = 0; k < a.m; ++k) {
      const double d = a.values[c * a.m + k] - b.values[c * a.m + k];
      d2 += d * d;
    }
    worst = std::max(worst, std::sqrt(d2));
  }
  return worst;
}

}  // namespace

TEST_CASE("quantization of a constant field") {
  std::vector<double> vals(10, 1.234);
  DiscreteSBV u = DiscreteSBV::from_cells(1, 10, 1, 1, 0.1, vals);
  DiscreteSBV q = quantize(u, 0.5, {0.0});
  for (int c = 1; c < q.cells(); ++c) CHECK(q.values[c] == q.values[0]);
  CHECK(q.total_variation() == 0.0);
}

TEST_CASE("quantizer sup bound and componentwise TV bound") {
  Rng master(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const int dim = 1 + (trial % 2);
    const int m = 1 + (trial % 3);
    const int nx = 8 + (trial % 21);
    const int ny = dim == 2 ? 6 + (trial % 13) : 1;
    DiscreteSBV u = random_field(dim, nx, ny, m, 1.0 / nx, master());
    std::uniform_real_distribution<double> ed(0.05, 1.5);
    const double eps = ed(master);
    const std::vector<double> rho = select_rho(u, eps);
    DiscreteSBV q = quantize(u, eps, rho);
    CHECK(sup_deviation(u, q) <= eps);
    for (int k = 0; k < m; ++k)
      CHECK(q.total_variation_comp(k) <= u.total_variation_comp(k));
    CHECK(q.total_variation() <= std::sqrt(double(m)) * u.total_variation() + 1e-12);
  }
}

TEST_CASE("two-cell mean identity over the offset") {
  // int_0^1 eps |floor(a/eps + rho) - floor(b/eps + rho)| drho = |a - b|
  const double eps = 0.37, a = 1.71, b = -0.43;
  std::vector<double> vals = {a, b};
  DiscreteSBV u = DiscreteSBV::piecewise_constant(1, 2, 1, 1, 0.5, vals);
  // integrate the piecewise-constant TV over rho by breakpoint enumeration
  std::vector<double> brk = {0.0, 1.0};
  for (double v : vals) {
    double f = v / eps - std::floor(v / eps);
    brk.push_back(1.0 - f);
  }
  std::sort(brk.begin(), brk.end());
  double integral = 0.0;
  for (size_t i = 0; i + 1 < brk.size(); ++i) {
    const double mid = 0.5 * (brk[i] + brk[i + 1]);
    DiscreteSBV q = quantize(u, eps, {mid});
    integral += (brk[i + 1] - brk[i]) * q.total_variation_comp(0);
  }
  CHECK(integral == doctest::Approx(std::abs(a - b)).epsilon(1e-12));
}

TEST_CASE("already-quantized fields select rho = 0 and keep their TV") {
  Rng rng(9);
  DiscreteSBV raw = random_field(1, 30, 1, 2, 0.1, rng());
  const double eps = 0.25;
  DiscreteSBV base = quantize(raw, eps, {0.0, 0.0});
  const std::vector<double> rho = select_rho(base, eps);
  for (double r : rho) CHECK(r == 0.0);
  DiscreteSBV q = quantize(base, eps, rho);
  CHECK(q.values == base.values);
  for (int k = 0; k < base.m; ++k)
    CHECK(q.total_variation_comp(k) == base.total_variation_comp(k));
}

TEST_CASE("quantization is idempotent") {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    DiscreteSBV u = random_field(2, 12, 9, 2, 0.1, rng());
    const std::vector<double> rho = select_rho(u, 0.3);
    DiscreteSBV q1 = quantize(u, 0.3, rho);
    DiscreteSBV q2 = quantize(q1, 0.3, rho);
    CHECK(q1.values == q2.values);
  }
}

TEST_CASE("truncation ladder branches and Lipschitz bound") {
  TruncationLadder ladder;
  CHECK(ladder.a(1) == 3.0);
  CHECK(ladder.a(2) == 9.0);
  CHECK(2.0 * ladder.a(1) < ladder.a(2));

  Rng rng(123);
  std::uniform_real_distribution<double> comp(-12.0, 12.0);
  for (int i = 0; i < 10000; ++i) {
    Vec z1(2), z2(2);
    z1 << comp(rng), comp(rng);
    z2 << comp(rng), comp(rng);
    Vec t1 = ladder.apply(1, z1), t2 = ladder.apply(1, z2);
    CHECK((t1 - t2).norm() <= (z1 - z2).norm() + 1e-9);
    if (z1.norm() <= 3.0) CHECK((t1 - z1).norm() == 0.0);
    if (z1.norm() >= 9.0) CHECK(t1.norm() == 0.0);
  }
}

TEST_CASE("truncate-then-quantize measure bound") {
  TruncationLadder ladder;
  Rng rng(55);
  for (int trial = 0; trial < 50; ++trial) {
    DiscreteSBV u = random_field(1, 60, 1, 2, 0.05, rng(), 6.0);
    const double eps = 0.2;
    DiscreteSBV t = truncate(u, 1, ladder);
    DiscreteSBV q = quantize(t, eps, select_rho(t, eps));
    int far = 0, tall = 0;
    for (int c = 0; c < u.cells(); ++c) {
      double d2 = 0.0, n2 = 0.0;
      for (int k = 0; k < u.m; ++k) {
        const double d = u.values[c * u.m + k] - q.values[c * u.m + k];
        d2 += d * d;
        n2 += u.values[c * u.m + k] * u.values[c * u.m + k];
      }
      if (std::sqrt(d2) > eps) ++far;
      if (std::sqrt(n2) > ladder.a(1)) ++tall;
    }
    CHECK(far <= tall);
  }
}

TEST_CASE("surface and bulk energies") {
  // single step of height z: one jump facet, H_g = g0(|z|)
  G0Density g0(0.5, 1.0);
  auto g_iso = [&](const Vec& jump, const Vec&) { return g0(jump.norm()); };
  std::vector<double> vals(20, 0.0);
  for (int i = 10; i < 20; ++i) vals[i] = 2.0;
  DiscreteSBV step = DiscreteSBV::piecewise_constant(1, 20, 1, 1, 0.05, vals);
  CHECK(surface_energy(step, g_iso) == doctest::Approx(g0(2.0)));

  // affine field: no jumps, H_Psi = Psi(slope) |Omega| up to the last cell
  BulkDensity pw = BulkDensity::power(2.0);
  const int n = 50;
  std::vector<double> affine(n);
  for (int i = 0; i < n; ++i) affine[i] = 3.0 * (i + 0.5) / n;
  DiscreteSBV lin = DiscreteSBV::from_cells(1, n, 1, 1, 1.0 / n, affine);
  CHECK(surface_energy(lin, g_iso) == 0.0);
  CHECK(bulk_energy(lin, pw) == doctest::Approx(9.0 * (n - 1.0) / n).epsilon(1e-9));
}

TEST_CASE("quantized surface energy stays controlled under refinement") {
  // u(x) = x has jump count ~ 1/eps after quantization but H_g stays within a
  // bounded ratio of eps^{gamma-1} ||grad u||_1
  G0Density g0(0.5, 1.0);
  double prev_ratio = 0.0;
  for (double eps : {1e-1, 1e-2, 1e-3}) {
    const int n = 2000;
    std::vector<double> vals(n);
    for (int i = 0; i < n; ++i) vals[i] = (i + 0.5) / n;
    DiscreteSBV u = DiscreteSBV::from_cells(1, n, 1, 1, 1.0 / n, vals);
    QuantizationReport rep = verify_quantization_estimate(u, eps, 5.0 * eps, 0.5 * eps, g0);
    CHECK(rep.sup_bound_ok);
    CHECK(rep.tv_bound_ok);
    CHECK(rep.lhs > 0.0);
    CHECK(rep.ratio <= 2.0);
    prev_ratio = std::max(prev_ratio, rep.ratio);
  }
  CHECK(prev_ratio > 0.0);
}

TEST_CASE("quantization estimate edge cases") {
  G0Density g0(0.5, 1.0);
  std::vector<double> vals(30, 1.0);
  DiscreteSBV constant = DiscreteSBV::piecewise_constant(1, 30, 1, 1, 0.1, vals);
  QuantizationReport rep = verify_quantization_estimate(constant, 0.1, 0.5, 0.05, g0);
  CHECK(rep.lhs == 0.0);

  // one jump far above delta survives quantization
  for (int i = 15; i < 30; ++i) vals[i] = 3.0;
  DiscreteSBV step = DiscreteSBV::piecewise_constant(1, 30, 1, 1, 0.1, vals);
  QuantizationReport rep2 = verify_quantization_estimate(step, 0.1, 0.5, 0.05, g0);
  CHECK(rep2.lhs > 0.0);

  CHECK_THROWS_AS(verify_quantization_estimate(step, 0.2, 0.5, 0.05, g0), InputError);
  CHECK_THROWS_AS(verify_quantization_estimate(step, 0.1, 0.5, 0.2, g0), InputError);
}

TEST_CASE("g0 family properties") {
  G0Density g0(0.5, 2.0);
  CHECK(g0(0.0) == 0.0);
  Rng rng(67);
  std::uniform_real_distribution<double> sd(0.0, 10.0);
  for (int i = 0; i < 10000; ++i) {
    const double s = sd(rng), t = sd(rng);
    CHECK(g0(s + t) <= g0(s) + g0(t) + 1e-12);
    if (t >= s) CHECK(g0(t) >= g0(s));
  }
  CHECK(g0(1e-12) / std::pow(1e-12, 0.5) == doctest::Approx(2.0));
  CHECK_THROWS_AS(G0Density(1.5, 1.0), InputError);
}

TEST_CASE("BV ellipticity single-competitor tester") {
  Vec z(1), nu(1);
  z[0] = 2.0;
  nu[0] = 1.0;

  G0Density g0(0.5, 1.0);
  auto g_sqrt = [&](const Vec& jump, const Vec&) { return g0(jump.norm()); };
  auto g_square = [](const Vec& jump, const Vec&) { return jump.squaredNorm(); };

  // the reference step itself: equality, no violation
  DiscreteSBV ref = reference_step(1, 64, z, nu);
  BvEllipticityResult base = bv_ellipticity_test(g_sqrt, z, nu, ref);
  CHECK_FALSE(base.violated);
  CHECK(base.rhs == doctest::Approx(base.lhs));

  // split family: subadditive density has no violation at any ratio
  for (int i = 1; i <= 9; ++i) {
    const double theta = i / 10.0;
    DiscreteSBV comp = split_competitor_1d(64, z, theta);
    BvEllipticityResult r = bv_ellipticity_test(g_sqrt, z, nu, comp);
    CHECK_FALSE(r.violated);
    CHECK(r.rhs >= r.lhs - 1e-12);
  }

  // |z|^2 at z = 2 with the half split: rhs = 2 < lhs = 4
  DiscreteSBV half = split_competitor_1d(64, z, 0.5);
  BvEllipticityResult v = bv_ellipticity_test(g_square, z, nu, half);
  CHECK(v.violated);
  CHECK(v.lhs == doctest::Approx(4.0));
  CHECK(v.rhs == doctest::Approx(2.0));

  // collar violation: competitor differing at the boundary is rejected
  DiscreteSBV bad = ref;
  bad.values[0] = 9.0;
  CHECK_THROWS_AS(bv_ellipticity_test(g_sqrt, z, nu, bad), InputError);
}

TEST_CASE("2D reference step and ellipticity") {
  Vec z(1), nu(2);
  z[0] = 1.0;
  nu[0] = 0.0;
  nu[1] = 1.0;
  G0Density g0(0.5, 1.0);
  auto g_iso = [&](const Vec& jump, const Vec&) { return g0(jump.norm()); };
  DiscreteSBV ref = reference_step(2, 32, z, nu);
  BvEllipticityResult r = bv_ellipticity_test(g_iso, z, nu, ref);
  CHECK_FALSE(r.violated);
  CHECK(r.rhs == doctest::Approx(r.lhs));  // 32 facets x h = unit section
}

TEST_CASE("DiscreteSBV IO roundtrip") {
  Rng rng(91);
  DiscreteSBV u = random_field(2, 9, 7, 3, 0.125, rng());
  const std::string path = "/tmp/cohesive_sbv_test.bin";
  u.write(path);
  DiscreteSBV back = DiscreteSBV::read(path);
  CHECK(back.values == u.values);
  CHECK(back.x_facets == u.x_facets);
  CHECK(back.y_facets == u.y_facets);
  CHECK(back.h == u.h);
  std::remove(path.c_str());
}

TEST_CASE("facet classification threshold") {
  std::vector<double> vals = {0.0, 0.05, 5.0, 5.02};
  DiscreteSBV u = DiscreteSBV::from_cells(1, 4, 1, 1, 0.1, vals, 10.0);
  // |diff| > 10 h = 1 marks a jump
  CHECK(u.x_facets[0] == FacetClass::Diffuse);
  CHECK(u.x_facets[1] == FacetClass::Jump);
  CHECK(u.x_facets[2] == FacetClass::Diffuse);
  CHECK(u.grad_l1() == doctest::Approx(0.05 + 0.02));
}
