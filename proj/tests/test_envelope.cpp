#include <doctest.h>

#include <cmath>

#include "cohesive/envelope.hpp"
#include "oracles.hpp"

using namespace cohesive;

TEST_CASE("convex function is a fixed point") {
  EnvelopeGrid1D g = sample_grid(-2.0, 2.0, 401, [](double x) { return x * x; });
  EnvelopeGrid1D hull = convex_envelope_1d(g);
  for (size_t i = 0; i < g.xs.size(); ++i)
    CHECK(hull.hull_ys[i] == doctest::Approx(g.ys[i]).epsilon(1e-12));
}

TEST_CASE("double well envelope matches the closed form") {
  auto f = [](double x) { return (x * x - 1.0) * (x * x - 1.0); };
  EnvelopeGrid1D g = sample_grid(-2.0, 2.0, 4001, f);
  EnvelopeGrid1D hull = convex_envelope_1d(g);
  // envelope: 0 on [-1, 1], f outside (f is convex there and C^1 at +-1)
  const double dx = 4.0 / 4000;
  const double lip = 24.0;  // |f'| at the window edge
  double worst = 0.0;
  for (size_t i = 0; i < g.xs.size(); ++i) {
    const double x = g.xs[i];
    const double exact = std::abs(x) <= 1.0 ? 0.0 : f(x);
    worst = std::max(worst, std::abs(hull.hull_ys[i] - exact));
  }
  CHECK(worst <= 2.0 * lip * dx);
}

TEST_CASE("envelope agrees with the brute-force chord oracle") {
  Rng rng(23);
  std::uniform_real_distribution<double> yd(0.0, 3.0);
  EnvelopeGrid1D g;
  for (int i = 0; i < 81; ++i) {
    g.xs.push_back(-1.0 + i * 2.0 / 80.0);
    g.ys.push_back(yd(rng));
  }
  EnvelopeGrid1D hull = convex_envelope_1d(g);
  std::vector<double> expected = oracles::brute_force_hull(g.xs, g.ys);
  for (size_t i = 0; i < g.xs.size(); ++i)
    CHECK(hull.hull_ys[i] == doctest::Approx(expected[i]).epsilon(1e-10));
}

TEST_CASE("capped density envelope matches the tangent construction") {
  // On a finite window the hull bends toward the endpoint chord, an O(1/W)
  // effect; a wide window recovers the tangent form x^2 / c|x| - c^2/4 on
  // the inner region.
  const double c = 4.0 / 3.0;
  auto h = [&](double x) { return std::min(x * x, c * std::abs(x)); };
  EnvelopeGrid1D g = sample_grid(-200.0, 200.0, 8001, h);
  EnvelopeGrid1D hull = convex_envelope_1d(g);
  for (size_t i = 0; i < g.xs.size(); ++i) {
    const double x = g.xs[i];
    if (std::abs(x) > 3.0) continue;
    const double exact = std::abs(x) <= c / 2 ? x * x : c * std::abs(x) - c * c / 4;
    CHECK(std::abs(hull.hull_ys[i] - exact) <= 6e-3);
  }
}

TEST_CASE("envelope structural invariants") {
  Rng rng(31);
  std::uniform_real_distribution<double> yd(-1.0, 4.0);
  EnvelopeGrid1D g;
  for (int i = 0; i < 501; ++i) {
    g.xs.push_back(i * 0.01);
    g.ys.push_back(yd(rng));
  }
  EnvelopeGrid1D hull = convex_envelope_1d(g);
  double scale = 0.0;
  for (double y : g.ys) scale = std::max(scale, std::abs(y));
  for (size_t i = 0; i < g.xs.size(); ++i) CHECK(hull.hull_ys[i] <= g.ys[i] + 1e-12);
  const double dx = 0.01;
  for (size_t i = 1; i + 1 < g.xs.size(); ++i) {
    const double second =
        (hull.hull_ys[i + 1] - 2.0 * hull.hull_ys[i] + hull.hull_ys[i - 1]) / (dx * dx);
    CHECK(second >= -1e-10 * scale / (dx * dx));
  }
  // idempotence
  EnvelopeGrid1D again;
  again.xs = hull.xs;
  again.ys = hull.hull_ys;
  EnvelopeGrid1D hull2 = convex_envelope_1d(again);
  for (size_t i = 0; i < g.xs.size(); ++i)
    CHECK(hull2.hull_ys[i] == doctest::Approx(hull.hull_ys[i]).epsilon(1e-12));
}

TEST_CASE("envelope input validation") {
  EnvelopeGrid1D bad;
  bad.xs = {0.0, 1.0, 0.5};
  bad.ys = {0.0, 0.0, 0.0};
  CHECK_THROWS_AS(convex_envelope_1d(bad), InputError);
  bad.xs = {0.0, 1.0};
  bad.ys = {0.0, 0.0};
  CHECK_THROWS_AS(convex_envelope_1d(bad), InputError);
}

TEST_CASE("hdelta envelopes converge to the density envelope") {
  EnvelopeGrid1D grid = sample_grid(-3.0, 3.0, 4001, [](double) { return 0.0; });
  for (double q : {2.0, 4.0}) {
    BulkDensity density = BulkDensity::power(q);
    SurfaceParams sp(2.0, q, 1.0);
    double prev = std::numeric_limits<double>::infinity();
    double final_err = 0.0;
    for (size_t k = 1; k <= 4; ++k) {
      const std::vector<double> deltas = {0.5, 0.9, 0.99, 0.999};
      std::vector<double> prefix(deltas.begin(), deltas.begin() + k);
      final_err = verify_hdelta_limit(density, sp, prefix, grid);
      CHECK(final_err <= prev + 1e-12);
      prev = final_err;
    }
    CHECK(final_err <= 0.05);
  }
}
