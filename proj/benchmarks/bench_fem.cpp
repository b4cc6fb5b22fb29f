#include "perfwall/effective.hpp"
#include "perfwall/fem.hpp"
#include "perfwall/geometry.hpp"
#include "perfwall/multiscale.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

namespace {

using namespace perfwall;

double bump(double x, double y) { return std::exp(-((x - 0.5) * (x - 0.5) + (y + 0.5) * (y + 0.5)) / 0.02); }

GeometryParams params_for(double eps)
{
    ParamRecord r;
    r.eps = eps;
    return validate_params(r);
}

ResolutionPolicy bulk_resolution(double eps)
{
    ResolutionPolicy res;
    res.h = eps / 8;
    return res;
}

// argument: 1/eps
void BM_BuildGrid(benchmark::State& state)
{
    const double eps = 1.0 / static_cast<double>(state.range(0));
    const GeometryParams p = params_for(eps);
    for (auto _ : state) {
        benchmark::DoNotOptimize(build_grid(p, bulk_resolution(eps)));
    }
}
BENCHMARK(BM_BuildGrid)->Arg(4)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_Assemble(benchmark::State& state)
{
    const double eps = 1.0 / static_cast<double>(state.range(0));
    const GridPtr g = build_grid(params_for(eps), bulk_resolution(eps));
    for (auto _ : state) {
        benchmark::DoNotOptimize(assemble_helmholtz_2d(*g, 0.5, bump));
    }
    state.counters["unknowns"] = static_cast<double>(g->unknown_count());
}
BENCHMARK(BM_Assemble)->Arg(4)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_SolveDirect(benchmark::State& state)
{
    const double eps = 1.0 / static_cast<double>(state.range(0));
    const GridPtr g = build_grid(params_for(eps), bulk_resolution(eps));
    const SparseSystem sys = assemble_helmholtz_2d(*g, 0.5, bump);
    for (auto _ : state) {
        benchmark::DoNotOptimize(solve_direct(sys));
    }
    state.counters["unknowns"] = static_cast<double>(g->unknown_count());
}
BENCHMARK(BM_SolveDirect)->Arg(4)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

// Bulk-only rectangle, argument: cells per side. Large sizes take the LU path.
void BM_SolveRectangle(benchmark::State& state)
{
    const GridPtr g = build_rectangle_grid(1.0, 1.0, 1.0 / static_cast<double>(state.range(0)));
    const SparseSystem sys = assemble_helmholtz_2d(*g, 0.5, bump);
    for (auto _ : state) {
        benchmark::DoNotOptimize(solve_direct(sys));
    }
    state.counters["unknowns"] = static_cast<double>(g->unknown_count());
}
BENCHMARK(BM_SolveRectangle)->Arg(128)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_EpsilonProblem(benchmark::State& state)
{
    const double eps = 1.0 / static_cast<double>(state.range(0));
    const GeometryParams p = params_for(eps);
    const GridPtr g = build_grid(p, bulk_resolution(eps));
    for (auto _ : state) {
        benchmark::DoNotOptimize(solve_epsilon_problem(g, p, bump));
    }
}
BENCHMARK(BM_EpsilonProblem)->Arg(4)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_Effective(benchmark::State& state)
{
    const double eps = 1.0 / static_cast<double>(state.range(0));
    const GeometryParams p = params_for(eps);
    const GridPtr g0 = build_limit_grid(p, bulk_resolution(eps));
    for (auto _ : state) {
        benchmark::DoNotOptimize(solve_effective(g0, p, bump));
    }
}
BENCHMARK(BM_Effective)->Arg(4)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
