#include "perfwall/multiscale.hpp"

#include "perfwall/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace perfwall {

namespace {

constexpr double kGaussLo = 0.5 - 0.5 / std::numbers::sqrt3;
constexpr double kGaussHi = 0.5 + 0.5 / std::numbers::sqrt3;

struct ChannelRows {
    std::size_t bottom; // x2 = 0
    std::size_t top;    // x2 = L eps
};

ChannelRows channel_rows(const Grid& g, const GeometryParams& p)
{
    const auto j0 = g.x2_index(0.0);
    const auto jc = g.x2_index(p.channel_top());
    if (g.kind() != DomainKind::EpsDomain || !j0 || !jc || g.channels().size() != p.channel_count()) {
        fail(ErrorCode::NoChannelsInGrid, "grid does not resolve the " + std::to_string(p.channel_count()) + " channels");
    }
    const auto x1 = g.x1_lines();
    for (std::size_t k = 0; k < p.channel_count(); ++k) {
        const ChannelSpan& c = g.channels()[k];
        if (x1[c.i_lo] != p.walls()[k].lo || x1[c.i_hi] != p.walls()[k].hi) {
            fail(ErrorCode::NoChannelsInGrid, "channel " + std::to_string(k) + " is not aligned with its walls");
        }
    }
    return {*j0, *jc};
}

double at(const Field& f, std::size_t i1, std::size_t i2) { return f.values[f.grid->node(i1, i2)]; }

// \int_0^1 |(1 - s) a + s b| ds
double abs_linear_mean(double a, double b)
{
    if ((a >= 0.0) == (b >= 0.0)) {
        return 0.5 * std::abs(a + b);
    }
    return 0.5 * (a * a + b * b) / (std::abs(a) + std::abs(b));
}

// \int over channel k of d2 u, summed cell by cell.
double channel_volume_d2(const Field& u, const ChannelSpan& c, const ChannelRows& rows)
{
    const auto x1 = u.grid->x1_lines();
    double sum = 0.0;
    for (std::size_t i2 = rows.bottom; i2 < rows.top; ++i2) {
        for (std::size_t i1 = c.i_lo; i1 < c.i_hi; ++i1) {
            const double hx = x1[i1 + 1] - x1[i1];
            sum += 0.5 * hx * ((at(u, i1, i2 + 1) + at(u, i1 + 1, i2 + 1)) - (at(u, i1, i2) + at(u, i1 + 1, i2)));
        }
    }
    return sum;
}

// \int of u along line i2 across channel k.
double channel_line_integral(const Field& u, const ChannelSpan& c, std::size_t i2)
{
    const auto x1 = u.grid->x1_lines();
    double sum = 0.0;
    for (std::size_t i1 = c.i_lo; i1 < c.i_hi; ++i1) {
        sum += 0.5 * (x1[i1 + 1] - x1[i1]) * (at(u, i1, i2) + at(u, i1 + 1, i2));
    }
    return sum;
}

} // namespace

Field solve_epsilon_problem(const GridPtr& grid_eps, const GeometryParams& p, const ScalarFunction& f, SolveLog* log)
{
    return solve_epsilon_problem(grid_eps, p, Source{f, true}, log);
}

Field solve_epsilon_problem(const GridPtr& grid_eps, const GeometryParams& p, const Source& source, SolveLog* log)
{
    AssemblyOptions options;
    options.f_support_omega0 = source.omega0_only;
    SolveResult r = solve_direct(assemble_helmholtz_2d(*grid_eps, p.omega(), source.f, options));
    if (log != nullptr) {
        log->record(r);
    }
    return Field(grid_eps, std::move(r.x));
}

TraceProfile extract_v_eps(const Field& u_eps, const GeometryParams& p)
{
    const Grid& g = *u_eps.grid;
    const auto js0 = g.x2_index(p.channel_top());
    const auto js1 = g.x2_index(p.strip_top());
    if (!js0 || !js1 || *js1 <= *js0) {
        fail(ErrorCode::NoStripInGrid, "grid has no strip lines at L eps and (L+V) eps");
    }
    const auto x1 = g.x1_lines();
    const auto x2 = g.x2_lines();
    const double thickness = x2[*js1] - x2[*js0];
    Vector v(static_cast<Eigen::Index>(x1.size()));
    for (std::size_t i1 = 0; i1 < x1.size(); ++i1) {
        double sum = 0.0;
        for (std::size_t i2 = *js0; i2 < *js1; ++i2) {
            const std::ptrdiff_t lo = g.node(i1, i2);
            const std::ptrdiff_t hi = g.node(i1, i2 + 1);
            if (lo == Grid::kInactive || hi == Grid::kInactive) {
                fail(ErrorCode::NoStripInGrid, "strip is not fully active");
            }
            sum += 0.5 * (x2[i2 + 1] - x2[i2]) * (u_eps.values[lo] + u_eps.values[hi]);
        }
        v[static_cast<Eigen::Index>(i1)] = sum / thickness;
    }
    return TraceProfile(Interval1DGrid(std::vector<double>(x1.begin(), x1.end())), std::move(v));
}

Field restrict_to_limit(const Field& u_eps, const GridPtr& grid0)
{
    const Grid& ge = *u_eps.grid;
    const Grid& g0 = *grid0;
    const auto e1 = ge.x1_lines();
    const auto e2 = ge.x2_lines();
    const auto l1 = g0.x1_lines();
    const auto l2 = g0.x2_lines();
    if (!std::equal(e1.begin(), e1.end(), l1.begin(), l1.end()) || l2.size() > e2.size() ||
        !std::equal(l2.begin(), l2.end(), e2.begin())) {
        fail(ErrorCode::GridMismatch, "limit grid is not built from the same line set as the eps grid");
    }
    Vector v(static_cast<Eigen::Index>(g0.unknown_count()));
    for (std::size_t k = 0; k < g0.unknown_count(); ++k) {
        const auto [i1, i2] = g0.lattice(k);
        const std::ptrdiff_t node = ge.node(i1, i2);
        if (node == Grid::kInactive) {
            fail(ErrorCode::GridMismatch, "limit-grid node is inactive on the eps grid");
        }
        v[static_cast<Eigen::Index>(k)] = u_eps.values[node];
    }
    return Field(grid0, std::move(v));
}

Field extract_corrector(const Field& u_eps, const Field& u, const GeometryParams& p)
{
    Field restricted = restrict_to_limit(u_eps, u.grid);
    return Field(u.grid, (restricted.values - u.values) / p.eps());
}

// ---------------------------------------------------------------------------
// Flux

double FluxDensity::operator()(double x1) const
{
    const auto it = std::upper_bound(period_bounds.begin(), period_bounds.end(), x1);
    std::size_t k = it == period_bounds.begin() ? 0 : static_cast<std::size_t>(it - period_bounds.begin()) - 1;
    k = std::min(k, density.size() - 1);
    return density[k];
}

double FluxDensity::integral_against(const std::function<double(double)>& antiderivative) const
{
    double sum = 0.0;
    for (std::size_t k = 0; k < density.size(); ++k) {
        sum += density[k] * (antiderivative(period_bounds[k + 1]) - antiderivative(period_bounds[k]));
    }
    return sum;
}

FluxDensity extract_flux(const Field& u_eps, const GeometryParams& p)
{
    const ChannelRows rows = channel_rows(*u_eps.grid, p);
    const double scale = 1.0 / (p.L() * p.eps() * p.eps());
    FluxDensity out;
    out.period_bounds.assign(p.period_bounds().begin(), p.period_bounds().end());
    out.channel_totals.reserve(p.channel_count());
    out.density.reserve(p.channel_count());
    for (std::size_t k = 0; k < p.channel_count(); ++k) {
        const double total = scale * channel_volume_d2(u_eps, u_eps.grid->channels()[k], rows);
        out.channel_totals.push_back(total);
        out.density.push_back(total / (out.period_bounds[k + 1] - out.period_bounds[k]));
    }
    return out;
}

ChannelDiagnostics channel_diagnostics(const Field& u_eps, const GeometryParams& p, const std::vector<ChannelWindow>& windows)
{
    const Grid& g = *u_eps.grid;
    const ChannelRows rows = channel_rows(g, p);
    const auto x1 = g.x1_lines();
    const auto x2 = g.x2_lines();
    const double eps = p.eps();
    const double flux_scale = 1.0 / (p.L() * eps * eps);

    ChannelDiagnostics d;
    double d1 = 0.0;
    double d2 = 0.0;
    std::vector<double> volume(p.channel_count());
    std::vector<double> top_int(p.channel_count());
    std::vector<double> bottom_int(p.channel_count());
    for (std::size_t k = 0; k < p.channel_count(); ++k) {
        const ChannelSpan& c = g.channels()[k];
        for (std::size_t i2 = rows.bottom; i2 < rows.top; ++i2) {
            for (std::size_t i1 = c.i_lo; i1 < c.i_hi; ++i1) {
                const double hx = x1[i1 + 1] - x1[i1];
                const double hy = x2[i2 + 1] - x2[i2];
                const double u00 = at(u_eps, i1, i2);
                const double u10 = at(u_eps, i1 + 1, i2);
                const double u01 = at(u_eps, i1, i2 + 1);
                const double u11 = at(u_eps, i1 + 1, i2 + 1);
                // d2 u is linear in x1 across the cell, d1 u is linear in x2
                d2 += hx * hy * abs_linear_mean((u01 - u00) / hy, (u11 - u10) / hy);
                d1 += hx * hy * abs_linear_mean((u10 - u00) / hx, (u11 - u01) / hx);
            }
        }
        const double width = x1[c.i_hi] - x1[c.i_lo];
        volume[k] = channel_volume_d2(u_eps, c, rows);
        top_int[k] = channel_line_integral(u_eps, c, rows.top);
        bottom_int[k] = channel_line_integral(u_eps, c, rows.bottom);
        d.per_channel_flux.push_back(flux_scale * volume[k]);
        d.top_avgs.push_back(top_int[k] / width);
        d.bottom_avgs.push_back(bottom_int[k] / width);
    }
    d.d2_l1_scaled = d2 / (eps * eps);
    d.d1_l1_scaled = d1 / eps;

    for (const ChannelWindow& w : windows) {
        if (w.k_begin >= w.k_end || w.k_end > p.channel_count()) {
            fail(ErrorCode::ValidationError, "channel window [" + std::to_string(w.k_begin) + ", " +
                                                 std::to_string(w.k_end) + ") is empty or out of range");
        }
        double vol = 0.0;
        double top = 0.0;
        double bottom = 0.0;
        for (std::size_t k = w.k_begin; k < w.k_end; ++k) {
            vol += volume[k];
            top += top_int[k];
            bottom += bottom_int[k];
        }
        d.B_eps_windows.push_back({w, flux_scale * vol, flux_scale * (top - bottom)});
    }
    return d;
}

double flow_rule_residual(const FluxDensity& j, const TraceProfile& v_eps, const ChannelDiagnostics& diag,
                          const GeometryParams& p)
{
    const double coeff = p.alpha() / p.L();
    double sum = 0.0;
    for (std::size_t k = 0; k < j.density.size(); ++k) {
        const double lo = j.period_bounds[k];
        const double hi = j.period_bounds[k + 1];
        const double v_mean = v_eps.integral(lo, hi) / (hi - lo);
        sum += (hi - lo) * std::abs(j.density[k] - coeff * (v_mean - diag.bottom_avgs[k]));
    }
    return sum;
}

std::vector<TestFunction> cosine_test_family(double a, int m_max)
{
    std::vector<TestFunction> family;
    family.push_back({[](double) { return 1.0; }, [](double) { return 0.0; }, [](double x) { return x; }});
    for (int m = 1; m <= m_max; ++m) {
        const double k = m * std::numbers::pi / a;
        family.push_back({[k](double x) { return std::cos(k * x); }, [k](double x) { return -k * std::sin(k * x); },
                          [k](double x) { return std::sin(k * x) / k; }});
    }
    return family;
}

double mass_conservation_defect(const FluxDensity& j, const TraceProfile& v_eps, const GeometryParams& p,
                                const TestFunction& psi, const TraceProfile* strip_source)
{
    const auto nodes = v_eps.grid.nodes();
    double stiff = 0.0;
    double mass = 0.0;
    double forcing = 0.0;
    for (std::size_t e = 0; e < v_eps.grid.element_count(); ++e) {
        const auto i = static_cast<Eigen::Index>(e);
        const double h = v_eps.grid.element_size(e);
        const double slope = (v_eps.values[i + 1] - v_eps.values[i]) / h;
        stiff += slope * (psi.value(nodes[e + 1]) - psi.value(nodes[e]));
        for (double s : {kGaussLo, kGaussHi}) {
            const double v = (1 - s) * v_eps.values[i] + s * v_eps.values[i + 1];
            const double x = nodes[e] + s * h;
            mass += 0.5 * h * v * psi.value(x);
            if (strip_source != nullptr) {
                forcing += 0.5 * h * (*strip_source)(x) * psi.value(x);
            }
        }
    }
    const double w2 = p.omega() * p.omega();
    return j.integral_against(psi.antiderivative) + p.V() * (stiff - w2 * mass - forcing);
}

double mass_conservation_residual(const FluxDensity& j, const TraceProfile& v_eps, const GeometryParams& p,
                                  const std::vector<TestFunction>& family, const TraceProfile* strip_source)
{
    double worst = 0.0;
    for (const TestFunction& psi : family) {
        worst = std::max(worst, std::abs(mass_conservation_defect(j, v_eps, p, psi, strip_source)));
    }
    return worst;
}

} // namespace perfwall
