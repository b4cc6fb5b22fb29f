#include "perfwall/effective.hpp"

#include "perfwall/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

namespace perfwall {

namespace {

std::string sci(double v)
{
    std::ostringstream os;
    os.precision(4);
    os << std::scientific << v;
    return os.str();
}

Field solve_on(const GridPtr& grid, const SparseSystem& sys, SolveLog* log)
{
    SolveResult r = solve_direct(sys);
    if (log != nullptr) {
        log->record(r);
    }
    return Field(grid, std::move(r.x));
}

std::size_t gamma0_row(const Grid& g)
{
    const auto j0 = g.x2_index(0.0);
    if (!j0) {
        fail(ErrorCode::NoTraceLine, "grid has no line at x2 = 0");
    }
    return *j0;
}

Interval1DGrid trace_grid(const Grid& g)
{
    const auto x1 = g.x1_lines();
    return Interval1DGrid(std::vector<double>(x1.begin(), x1.end()));
}

} // namespace

// ---------------------------------------------------------------------------
// TraceProfile

TraceProfile::TraceProfile(Interval1DGrid g, Vector v)
    : grid(std::move(g))
    , values(std::move(v))
{
    if (static_cast<std::size_t>(values.size()) != grid.size()) {
        fail(ErrorCode::GridMismatch, "profile length does not match its interval grid");
    }
}

TraceProfile TraceProfile::constant(Interval1DGrid grid, double value)
{
    const auto n = static_cast<Eigen::Index>(grid.size());
    return TraceProfile(std::move(grid), Vector::Constant(n, value));
}

TraceProfile TraceProfile::interpolate(Interval1DGrid grid, const std::function<double(double)>& fn)
{
    Vector v(static_cast<Eigen::Index>(grid.size()));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        v[static_cast<Eigen::Index>(i)] = fn(grid.nodes()[i]);
    }
    return TraceProfile(std::move(grid), std::move(v));
}

double TraceProfile::operator()(double x1) const
{
    const auto nodes = grid.nodes();
    if (x1 <= nodes.front()) {
        return values[0];
    }
    if (x1 >= nodes.back()) {
        return values[values.size() - 1];
    }
    const auto it = std::upper_bound(nodes.begin(), nodes.end(), x1);
    const auto e = static_cast<Eigen::Index>(it - nodes.begin()) - 1;
    const double s = (x1 - nodes[static_cast<std::size_t>(e)]) / grid.element_size(static_cast<std::size_t>(e));
    return (1 - s) * values[e] + s * values[e + 1];
}

double TraceProfile::integral(double lo, double hi) const
{
    const auto nodes = grid.nodes();
    double sum = 0.0;
    for (std::size_t e = 0; e < grid.element_count(); ++e) {
        const double x0 = std::max(lo, nodes[e]);
        const double x1 = std::min(hi, nodes[e + 1]);
        if (x1 <= x0) {
            continue;
        }
        sum += 0.5 * (x1 - x0) * ((*this)(x0) + (*this)(x1));
    }
    return sum;
}

std::optional<TraceProfile> Source::strip_profile(const Interval1DGrid& grid) const
{
    if (omega0_only) {
        return std::nullopt;
    }
    return TraceProfile::interpolate(grid, [this](double x1) { return f(x1, 0.0); });
}

// ---------------------------------------------------------------------------
// Solves

Field solve_trivial_limit(const GridPtr& grid0, const GeometryParams& p, const ScalarFunction& f, SolveLog* log)
{
    guard_neumann_eigenvalue(p.a(), p.b(), p.omega());
    return solve_on(grid0, assemble_helmholtz_2d(*grid0, p.omega(), f), log);
}

TraceProfile trace_on_gamma0(const Field& u)
{
    const Grid& g = *u.grid;
    const std::size_t j0 = gamma0_row(g);
    Vector values(static_cast<Eigen::Index>(g.x1_lines().size()));
    for (std::size_t i1 = 0; i1 < g.x1_lines().size(); ++i1) {
        const std::ptrdiff_t node = g.node(i1, j0);
        if (node == Grid::kInactive) {
            fail(ErrorCode::NoTraceLine, "line x2 = 0 is not fully active");
        }
        values[static_cast<Eigen::Index>(i1)] = u.values[node];
    }
    return TraceProfile(trace_grid(g), std::move(values));
}

bool guard_resonator_eigenvalue(const GeometryParams& p)
{
    const double w2 = p.omega() * p.omega();
    const double c = p.resonator_coefficient();
    for (int m = 0; m <= 20; ++m) {
        const double k = m * std::numbers::pi / p.a();
        const double lambda = k * k + c;
        const double gap = std::abs(w2 - lambda) / std::max(lambda, w2);
        if (gap < 1e-3) {
            warn("omega^2 = " + sci(w2) + " is within relative " + sci(gap) + " of the resonator eigenvalue " +
                 sci(lambda) + " (mode m = " + std::to_string(m) + ")");
            return true;
        }
    }
    return false;
}

TraceProfile solve_v(const TraceProfile& u_trace, const GeometryParams& p, SolveLog* log,
                     const TraceProfile* strip_source)
{
    guard_resonator_eigenvalue(p);
    const double c = p.resonator_coefficient();
    const double c0 = c - p.omega() * p.omega();
    Vector g = c * u_trace.values;
    if (strip_source != nullptr) {
        if (!(strip_source->grid == u_trace.grid)) {
            fail(ErrorCode::GridMismatch, "strip source and trace live on different interval grids");
        }
        g += strip_source->values;
    }
    const SparseSystem sys = assemble_1d_v(u_trace.grid, c0, {g.data(), static_cast<std::size_t>(g.size())});
    SolveResult r = solve_direct(sys);
    if (log != nullptr) {
        log->record(r);
    }
    return TraceProfile(u_trace.grid, std::move(r.x));
}

Vector corrector_load_weak(const TraceProfile& v, const GeometryParams& p, const TraceProfile* strip_source)
{
    const double w2 = p.omega() * p.omega();
    const SparseMatrix m = mass_1d(v.grid);
    const SparseMatrix op = stiffness_1d(v.grid) - w2 * m;
    Vector load = -p.V() * (op * v.values);
    if (strip_source != nullptr) {
        if (!(strip_source->grid == v.grid)) {
            fail(ErrorCode::GridMismatch, "strip source and v live on different interval grids");
        }
        load += p.V() * (m * strip_source->values);
    }
    return load;
}

Vector corrector_load_flux(const TraceProfile& v, const TraceProfile& u_trace, const GeometryParams& p)
{
    if (!(v.grid == u_trace.grid)) {
        fail(ErrorCode::GridMismatch, "v and the trace of u live on different interval grids");
    }
    return (p.alpha() / p.L()) * (mass_1d(v.grid) * (v.values - u_trace.values));
}

Field solve_corrector_with_load(const Vector& gamma0_load, const GeometryParams& p, const GridPtr& grid0, SolveLog* log)
{
    const Grid& g = *grid0;
    const std::size_t j0 = gamma0_row(g);
    if (static_cast<std::size_t>(gamma0_load.size()) != g.x1_lines().size()) {
        fail(ErrorCode::GridMismatch, "Gamma0 load does not match the trace nodes of the grid");
    }
    guard_neumann_eigenvalue(p.a(), p.b(), p.omega());
    SparseSystem sys = assemble_helmholtz_2d(g, p.omega(), [](double, double) { return 0.0; });
    for (std::size_t i1 = 0; i1 < g.x1_lines().size(); ++i1) {
        const std::ptrdiff_t node = g.node(i1, j0);
        if (node == Grid::kInactive) {
            fail(ErrorCode::NoTraceLine, "line x2 = 0 is not fully active");
        }
        sys.rhs[node] += gamma0_load[static_cast<Eigen::Index>(i1)];
    }
    return solve_on(grid0, sys, log);
}

Field solve_corrector_w(const TraceProfile& v, const GeometryParams& p, const GridPtr& grid0, SolveLog* log,
                        const TraceProfile* strip_source)
{
    const auto x1 = grid0->x1_lines();
    if (!std::equal(x1.begin(), x1.end(), v.grid.nodes().begin(), v.grid.nodes().end())) {
        fail(ErrorCode::GridMismatch, "v is not defined on the Gamma0 trace nodes of the grid");
    }
    return solve_corrector_with_load(corrector_load_weak(v, p, strip_source), p, grid0, log);
}

EffectiveSolution solve_effective(const GridPtr& grid0, const GeometryParams& p, const Source& source, SolveLog* log)
{
    Field u = solve_trivial_limit(grid0, p, source.f, log);
    const TraceProfile trace = trace_on_gamma0(u);
    const std::optional<TraceProfile> strip = source.strip_profile(trace.grid);
    const TraceProfile* fs = strip ? &*strip : nullptr;
    TraceProfile v = solve_v(trace, p, log, fs);
    // The flux form avoids differentiating v on the channel-scale x1 cells.
    Field w = solve_corrector_with_load(corrector_load_flux(v, trace, p), p, grid0, log);
    return {std::move(u), std::move(v), std::move(w), p.omega()};
}

EffectiveSolution solve_effective(const GridPtr& grid0, const GeometryParams& p, const ScalarFunction& f, SolveLog* log)
{
    return solve_effective(grid0, p, Source{f, true}, log);
}

double resonance_frequency(const GeometryParams& p) { return std::sqrt(p.resonator_coefficient()); }

double mode_amplitude_ratio(double k, const GeometryParams& p)
{
    const double c = p.resonator_coefficient();
    const double den = k * k + c - p.omega() * p.omega();
    if (std::abs(den) < 1e-12 * c) {
        fail(ErrorCode::ResonantMode, "k^2 + alpha/(LV) - omega^2 = " + sci(den) + " vanishes");
    }
    return c / den;
}

} // namespace perfwall
