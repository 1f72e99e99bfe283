#include <benchmark/benchmark.h>

#include "cohesive/densities.hpp"
#include "cohesive/envelope.hpp"
#include "cohesive/phase_field.hpp"
#include "cohesive/sbv.hpp"
#include "cohesive/surface.hpp"

using namespace cohesive;

namespace {

const SurfaceParams kParams{2.0, 2.0, 1.0};

Vec scalar(double v) {
  Vec x(1);
  x[0] = v;
  return x;
}

void CellEnergyEval(benchmark::State& state) {
  RecessionDensity rec = recession(BulkDensity::power(2.0));
  Profile p = Profile::default_init(scalar(1.0), scalar(1.0), 8.0,
                                    static_cast<int>(state.range(0)), kParams);
  for (auto _ : state) {
    benchmark::DoNotOptimize(cell_energy(p, rec, kParams));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(CellEnergyEval)->RangeMultiplier(4)->Range(512, 8192)->Complexity();

void MinimizeCellSolve(benchmark::State& state) {
  RecessionDensity rec = recession(BulkDensity::power(2.0));
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto [prof, rep] =
        minimize_cell(scalar(1.0), scalar(1.0), 8.0, n, kInfiniteM, rec, kParams);
    benchmark::DoNotOptimize(rep.value);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(MinimizeCellSolve)->RangeMultiplier(2)->Range(1001, 4001)->Complexity()
    ->Unit(benchmark::kMillisecond);

void GScalSolve(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(g_scal(1.0, kParams, static_cast<int>(state.range(0))).value);
  }
}
BENCHMARK(GScalSolve)->Arg(1000)->Arg(2000)->Unit(benchmark::kMillisecond);

void QuantizeField(benchmark::State& state) {
  DiscreteSBV u = random_field(2, 64, 64, 2, 1.0 / 64, 42);
  for (auto _ : state) {
    const std::vector<double> rho = select_rho(u, 0.25);
    benchmark::DoNotOptimize(quantize(u, 0.25, rho).values.data());
  }
  state.SetItemsProcessed(state.iterations() * u.cells());
}
BENCHMARK(QuantizeField)->Unit(benchmark::kMillisecond);

void EnvelopeHull(benchmark::State& state) {
  EnvelopeGrid1D g = sample_grid(-3.0, 3.0, static_cast<int>(state.range(0)),
                                 [](double x) { return (x * x - 1) * (x * x - 1); });
  for (auto _ : state) {
    benchmark::DoNotOptimize(convex_envelope_1d(g).hull_ys.data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(EnvelopeHull)->RangeMultiplier(4)->Range(1001, 16001)->Complexity();

void PhaseFieldAssembly(benchmark::State& state) {
  PhaseFieldState s = PhaseFieldState::grid_2d(static_cast<int>(state.range(0)), 8.0, 1.0, 2);
  Rng rng(3);
  std::uniform_real_distribution<double> du(-1.0, 1.0), dv(0.1, 0.9);
  for (double& x : s.u) x = du(rng);
  for (double& x : s.v) x = dv(rng);
  BulkDensity density = BulkDensity::power(2.0);
  BoundaryCondition bc = BoundaryCondition::none(s);
  for (auto _ : state) {
    benchmark::DoNotOptimize(assemble_energy(s, density, kParams, bc));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(PhaseFieldAssembly)->RangeMultiplier(2)->Range(17, 129)->Complexity();

}  // namespace

BENCHMARK_MAIN();
