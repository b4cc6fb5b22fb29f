#include "perfwall/errors.hpp"
#include "perfwall/multiscale.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace perfwall {
namespace {

constexpr double pi = std::numbers::pi;

struct Domain {
    GeometryParams p;
    GridPtr grid;
    GridPtr grid0;
};

Domain make_domain(double eps = 0.25, ResolutionPolicy res = {})
{
    ParamRecord r;
    r.eps = eps;
    const GeometryParams p = validate_params(r);
    res.h = std::min(res.h, eps / 2);
    return {p, build_grid(p, res), build_limit_grid(p, res)};
}

double max_deviation(const Vector& v, double c)
{
    return (v.array() - c).abs().maxCoeff();
}

std::vector<ChannelWindow> all_windows(std::size_t n)
{
    return {{0, n}, {0, n / 2}, {n / 2, n}, {1, 2}};
}

TEST(EpsilonProblem, ConstantSourceGivesConstantSolution)
{
    for (double eps : {0.25, 0.125}) {
        const Domain s = make_domain(eps);
        const Source src{[](double, double) { return 1.0; }, false};
        SolveLog log;
        const Field u = solve_epsilon_problem(s.grid, s.p, src, &log);
        EXPECT_LE(max_deviation(u.values, -4.0), 1e-9) << eps;
        EXPECT_LE(log.max_residual, 1e-10);
    }
}

TEST(EpsilonProblem, ZeroSourceGivesZero)
{
    const Domain s = make_domain();
    const Field u = solve_epsilon_problem(s.grid, s.p, [](double, double) { return 0.0; });
    EXPECT_EQ(u.values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(StripAverage, Constant)
{
    const Domain s = make_domain();
    const TraceProfile v = extract_v_eps(Field::constant(s.grid, 2.5), s.p);
    EXPECT_LE(max_deviation(v.values, 2.5), 1e-15);
    EXPECT_EQ(v.grid.size(), s.grid->x1_lines().size());
}

TEST(StripAverage, LinearInX2)
{
    const Domain s = make_domain();
    const TraceProfile v = extract_v_eps(Field::interpolate(s.grid, [](double, double y) { return y; }), s.p);
    // midpoint of (0.25, 0.5)
    EXPECT_LE(max_deviation(v.values, 0.375), 1e-15);
}

TEST(StripAverage, Separable)
{
    ResolutionPolicy res;
    res.n_s = 8;
    const Domain s = make_domain(0.25, res);
    const auto g = [](double y) { return y * y; };
    const TraceProfile v = extract_v_eps(
        Field::interpolate(s.grid, [&](double x, double y) { return std::cos(pi * x) * g(y); }), s.p);
    // strip average of the piecewise-linear interpolant of y^2 over the strip lines
    const auto x2 = s.grid->x2_lines();
    const std::size_t lo = *s.grid->x2_index(s.p.channel_top());
    const std::size_t hi = *s.grid->x2_index(s.p.strip_top());
    double avg = 0.0;
    for (std::size_t j = lo; j < hi; ++j) {
        avg += 0.5 * (g(x2[j]) + g(x2[j + 1])) * (x2[j + 1] - x2[j]);
    }
    avg /= s.p.strip_top() - s.p.channel_top();
    for (std::size_t i = 0; i < v.grid.size(); ++i) {
        EXPECT_NEAR(v.values[static_cast<Eigen::Index>(i)], std::cos(pi * v.grid.nodes()[i]) * avg, 1e-15);
    }
}

TEST(StripAverage, LimitGridHasNoStrip)
{
    const Domain s = make_domain();
    try {
        (void)extract_v_eps(Field::constant(s.grid0, 1.0), s.p);
        FAIL() << "expected NoStripInGrid";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NoStripInGrid);
    }
}

TEST(Corrector, DifferenceQuotient)
{
    const Domain s = make_domain();
    const auto phi = [](double x, double y) { return std::sin(3 * x) * y; };
    const Field u = Field::interpolate(s.grid0, [](double x, double y) { return x + y * y; });
    const Field ue_same = Field::interpolate(s.grid, [](double x, double y) { return x + y * y; });
    EXPECT_EQ(extract_corrector(ue_same, u, s.p).values.cwiseAbs().maxCoeff(), 0.0);

    const Field ue = Field::interpolate(s.grid, [&](double x, double y) { return x + y * y + 0.25 * phi(x, y); });
    const Field w = extract_corrector(ue, u, s.p);
    const Field expected = Field::interpolate(s.grid0, phi);
    EXPECT_LE((w.values - expected.values).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Corrector, ForeignGridIsRejected)
{
    const Domain s = make_domain();
    const Field ue = Field::constant(s.grid, 1.0);
    const Field u = Field::constant(build_rectangle_grid(1.0, 1.0, 0.25), 1.0);
    try {
        (void)extract_corrector(ue, u, s.p);
        FAIL() << "expected GridMismatch";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::GridMismatch);
    }
}

TEST(Flux, LinearInX2)
{
    const Domain s = make_domain();
    const FluxDensity j = extract_flux(Field::interpolate(s.grid, [](double, double y) { return y; }), s.p);
    ASSERT_EQ(j.channel_totals.size(), 4u);
    for (std::size_t k = 0; k < 4; ++k) {
        // (1/(L eps^2)) * alpha eps^3 * L eps = alpha eps^2; density alpha eps
        EXPECT_NEAR(j.channel_totals[k], 1.0 / 16, 1e-15);
        EXPECT_NEAR(j.density[k], 0.25, 1e-15);
    }
    EXPECT_NEAR(j(0.6), 0.25, 1e-15);
}

TEST(Flux, ConstantHasNone)
{
    const Domain s = make_domain();
    const FluxDensity j = extract_flux(Field::constant(s.grid, -4.0), s.p);
    for (double d : j.density) {
        EXPECT_EQ(d, 0.0);
    }
}

TEST(Flux, LimitGridHasNoChannels)
{
    const Domain s = make_domain();
    try {
        (void)extract_flux(Field::constant(s.grid0, 1.0), s.p);
        FAIL() << "expected NoChannelsInGrid";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NoChannelsInGrid);
    }
}

TEST(Diagnostics, LinearInX2)
{
    const Domain s = make_domain();
    const ChannelDiagnostics d =
        channel_diagnostics(Field::interpolate(s.grid, [](double, double y) { return y; }), s.p, all_windows(4));
    EXPECT_NEAR(d.d2_l1_scaled, 0.25, 1e-14); // a alpha L eps
    EXPECT_NEAR(d.d1_l1_scaled, 0.0, 1e-15);
    for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_NEAR(d.top_avgs[k], 0.25, 1e-15);
        EXPECT_NEAR(d.bottom_avgs[k], 0.0, 1e-15);
    }
}

TEST(Diagnostics, ConstantFieldIsQuiet)
{
    const Domain s = make_domain();
    const ChannelDiagnostics d = channel_diagnostics(Field::constant(s.grid, 1.75), s.p, all_windows(4));
    EXPECT_EQ(d.d2_l1_scaled, 0.0);
    EXPECT_EQ(d.d1_l1_scaled, 0.0);
    for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_EQ(d.per_channel_flux[k], 0.0);
        EXPECT_EQ(d.top_avgs[k], 1.75);
        EXPECT_EQ(d.bottom_avgs[k], 1.75);
    }
    for (const WindowFlux& w : d.B_eps_windows) {
        EXPECT_EQ(w.volume_form, 0.0);
        EXPECT_EQ(w.boundary_form, 0.0);
    }
}

class IntegrationByParts : public ::testing::TestWithParam<double> {};

TEST_P(IntegrationByParts, VolumeAndBoundaryFormsAgreeOnRandomFields)
{
    ResolutionPolicy res;
    res.n_w = 3;
    res.n_l = 5;
    const Domain s = make_domain(GetParam(), res);
    const std::size_t n = s.p.channel_count();
    std::mt19937_64 rng(20261016);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        Vector values(static_cast<Eigen::Index>(s.grid->unknown_count()));
        for (Eigen::Index i = 0; i < values.size(); ++i) {
            values[i] = dist(rng);
        }
        const Field u(s.grid, values);
        const ChannelDiagnostics d = channel_diagnostics(u, s.p, all_windows(n));
        for (const WindowFlux& w : d.B_eps_windows) {
            ASSERT_LE(std::abs(w.volume_form - w.boundary_form), 1e-10);
        }
        // flux additivity
        const double total = std::accumulate(d.per_channel_flux.begin(), d.per_channel_flux.end(), 0.0);
        ASSERT_NEAR(total, d.B_eps_windows[0].volume_form, 1e-10 * std::max(1.0, std::abs(total)));
        ASSERT_GE(d.d1_l1_scaled, 0.0);
        ASSERT_GE(d.d2_l1_scaled, 0.0);
    }
}

INSTANTIATE_TEST_SUITE_P(Periods, IntegrationByParts, ::testing::Values(0.25, 0.125, 0.0625));

TEST(Diagnostics, PerChannelResultsIgnoreWindowChoice)
{
    const Domain s = make_domain();
    const Field u = Field::interpolate(s.grid, [](double x, double y) { return std::cos(5 * x) * y + x; });
    const ChannelDiagnostics a = channel_diagnostics(u, s.p, all_windows(4));
    const ChannelDiagnostics b = channel_diagnostics(u, s.p, {{3, 4}});
    EXPECT_EQ(a.per_channel_flux, b.per_channel_flux);
    EXPECT_EQ(a.top_avgs, b.top_avgs);
}

TEST(FlowRule, ConstantStateHasZeroResidual)
{
    const Domain s = make_domain();
    const Field u = Field::constant(s.grid, -4.0);
    const FluxDensity j = extract_flux(u, s.p);
    const TraceProfile v = extract_v_eps(u, s.p);
    const ChannelDiagnostics d = channel_diagnostics(u, s.p, all_windows(4));
    EXPECT_EQ(flow_rule_residual(j, v, d, s.p), 0.0);
}

TEST(MassConservation, ConstantStateBalancesStripSource)
{
    const Domain s = make_domain();
    const Field u = Field::constant(s.grid, -4.0);
    const FluxDensity j = extract_flux(u, s.p);
    const TraceProfile v = extract_v_eps(u, s.p);
    const TraceProfile fs = TraceProfile::constant(v.grid, 1.0);
    // V omega^2 \int v psi = -V \int f_s psi when v = -1/omega^2
    EXPECT_LE(mass_conservation_residual(j, v, s.p, cosine_test_family(1.0, 4), &fs), 1e-14);
}

TEST(MassConservation, TestFamily)
{
    const std::vector<TestFunction> fam = cosine_test_family(2.0, 4);
    ASSERT_EQ(fam.size(), 5u);
    EXPECT_EQ(fam[0].value(0.3), 1.0);
    EXPECT_NEAR(fam[2].value(0.5), std::cos(pi * 0.5), 1e-15);
    EXPECT_NEAR(fam[2].derivative(0.5), -pi * std::sin(pi * 0.5), 1e-15);
    EXPECT_NEAR(fam[2].antiderivative(0.5) - fam[2].antiderivative(0.0), std::sin(pi * 0.5) / pi, 1e-15);
}

} // namespace
} // namespace perfwall
