#include "perfwall/effective.hpp"
#include "perfwall/errors.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

namespace perfwall {
namespace {

constexpr double pi = std::numbers::pi;

GeometryParams params(double alpha = 1, double L = 1, double V = 1, double omega = 0.5)
{
    ParamRecord r;
    r.alpha = alpha;
    r.L = L;
    r.V = V;
    r.omega = omega;
    return validate_params(r);
}

Interval1DGrid trace_grid(const Grid& g)
{
    return Interval1DGrid({g.x1_lines().begin(), g.x1_lines().end()});
}

double max_deviation(const Vector& v, double c)
{
    return (v.array() - c).abs().maxCoeff();
}

ErrorCode code_of(const std::function<void()>& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorCode::IoError;
}

TEST(TrivialLimit, ManufacturedCosineConverges)
{
    const GeometryParams p = params();
    const double kappa = pi;
    std::vector<double> errors;
    for (double h : {1.0 / 8, 1.0 / 16, 1.0 / 32}) {
        const GridPtr g = build_rectangle_grid(1.0, 1.0, h);
        const Field u = solve_trivial_limit(
            g, p, [&](double x, double) { return (kappa * kappa - 0.25) * std::cos(kappa * x); });
        errors.push_back(norm(u, Reference{[&](double x, double) { return std::cos(kappa * x); }, {}}, NormKind::L2));
    }
    EXPECT_GE(std::log2(errors[0] / errors[1]), 1.8);
    EXPECT_GE(std::log2(errors[1] / errors[2]), 1.8);
}

TEST(TrivialLimit, ConstantAndZeroSources)
{
    const GeometryParams p = params();
    const GridPtr g = build_rectangle_grid(1.0, 1.0, 0.125);
    const Field u = solve_trivial_limit(g, p, [](double, double) { return 3.0; });
    EXPECT_LE(max_deviation(u.values, -3.0 / 0.25), 1e-12);
    const Field z = solve_trivial_limit(g, p, [](double, double) { return 0.0; });
    EXPECT_EQ(z.values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Trace, SamplesTheGamma0Line)
{
    const GridPtr g = build_rectangle_grid(1.0, 1.0, 0.25);
    const TraceProfile t0 = trace_on_gamma0(Field::interpolate(g, [](double, double y) { return y; }));
    EXPECT_EQ(t0.values.cwiseAbs().maxCoeff(), 0.0);

    const TraceProfile tc = trace_on_gamma0(Field::interpolate(g, [](double x, double) { return std::cos(pi * x); }));
    ASSERT_EQ(tc.grid.size(), 5u);
    for (std::size_t i = 0; i < tc.grid.size(); ++i) {
        EXPECT_EQ(tc.values[static_cast<Eigen::Index>(i)], std::cos(pi * tc.grid.nodes()[i]));
    }

    const TraceProfile t3 = trace_on_gamma0(Field::constant(g, 3.0));
    EXPECT_EQ(max_deviation(t3.values, 3.0), 0.0);
}

TEST(Trace, MissingLineIsReported)
{
    const auto g = std::make_shared<const Grid>(std::vector<double>{0.0, 1.0}, std::vector<double>{-1.0, -0.5},
                                                std::vector<Region>{Region::Omega0}, DomainKind::LimitDomain);
    EXPECT_EQ(code_of([&] { (void)trace_on_gamma0(Field::constant(g, 1.0)); }), ErrorCode::NoTraceLine);
}

TEST(ResonatorEquation, ConstantTraceIsExact)
{
    const GeometryParams p = params();
    const Interval1DGrid g1({0.0, 0.01, 0.2, 0.21, 0.6, 1.0});
    const TraceProfile v = solve_v(TraceProfile::constant(g1, 2.0), p);
    // u0 * c / (c - omega^2) with c = 1, omega = 1/2: factor 4/3
    EXPECT_LE(max_deviation(v.values, 2.0 * 4.0 / 3.0), 1e-13);
}

TEST(ResonatorEquation, CosineTraceMatchesModeRelation)
{
    const GeometryParams p = params();
    const double k = pi;
    const double v0 = mode_amplitude_ratio(k, p);
    EXPECT_NEAR(v0, 1.0 / (pi * pi + 0.75), 1e-15);
    std::vector<double> errors;
    for (std::size_t n : {16u, 32u, 64u}) {
        const Interval1DGrid g1 = Interval1DGrid::uniform(1.0, n);
        const TraceProfile v = solve_v(TraceProfile::interpolate(g1, [&](double x) { return std::cos(k * x); }), p);
        errors.push_back(norm_1d(g1, std::span<const double>(v.values.data(), n + 1),
                                 [&](double x) { return v0 * std::cos(k * x); }, NormKind::L2));
    }
    EXPECT_GE(std::log2(errors[0] / errors[1]), 1.8);
    EXPECT_GE(std::log2(errors[1] / errors[2]), 1.8);
}

TEST(ResonatorEquation, AmplitudeGrowsInverselyWithDetuning)
{
    // ||v||_inf |omega_H^2 - omega^2| -> alpha/(LV) |u0|
    const Interval1DGrid g1 = Interval1DGrid::uniform(1.0, 16);
    const double u0 = 0.7;
    for (double delta : {1e-2, 1e-3, 1e-4}) {
        const GeometryParams p = params(1, 1, 1, std::sqrt(1.0 - delta));
        const TraceProfile v = solve_v(TraceProfile::constant(g1, u0), p);
        EXPECT_NEAR(v.values.cwiseAbs().maxCoeff() * delta, u0, 0.05 * u0);
    }
}

TEST(ResonatorEquation, ExactResonanceIsSingular)
{
    const GeometryParams p = params(1, 1, 1, 1.0);
    const Interval1DGrid g1 = Interval1DGrid::uniform(1.0, 8);
    EXPECT_EQ(code_of([&] { (void)solve_v(TraceProfile::constant(g1, 1.0), p); }), ErrorCode::SingularMatrix);
}

TEST(Corrector, ZeroDataGivesZero)
{
    const GeometryParams p = params();
    const GridPtr g = build_rectangle_grid(1.0, 1.0, 0.125);
    const Field w = solve_corrector_w(TraceProfile::constant(trace_grid(*g), 0.0), p, g);
    EXPECT_EQ(w.values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Corrector, ConstantVHasConstantNeumannData)
{
    const GeometryParams p = params();
    const GridPtr g = build_rectangle_grid(1.0, 1.0, 0.125);
    const Interval1DGrid g1 = trace_grid(*g);
    const double u0 = 1.5;
    const double v0 = u0 * mode_amplitude_ratio(0.0, p);
    const TraceProfile v = TraceProfile::constant(g1, v0);

    const Vector weak = corrector_load_weak(v, p);
    const Vector flux = corrector_load_flux(v, TraceProfile::constant(g1, u0), p);
    // V omega^2 v0 \int phi_i
    const SparseMatrix m = mass_1d(g1);
    const Vector expected = p.V() * 0.25 * v0 * (m * Vector::Ones(m.rows()));
    EXPECT_LE((weak - expected).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LE((weak - flux).cwiseAbs().maxCoeff(), 1e-10);
}

class TwoPathLoad : public ::testing::TestWithParam<int> {};

TEST_P(TwoPathLoad, WeakAndFluxFormsAgree)
{
    const GeometryParams p = params(1.0 + GetParam(), 1.0, 0.5 + GetParam(), 0.5);
    const GridPtr g = build_rectangle_grid(1.0, 1.0, 1.0 / 16);
    const Field u = solve_trivial_limit(g, p, [](double x, double y) {
        return std::exp(-((x - 0.5) * (x - 0.5) + (y + 0.3) * (y + 0.3)) / 0.05);
    });
    const TraceProfile trace = trace_on_gamma0(u);
    const TraceProfile v = solve_v(trace, p);
    const Vector weak = corrector_load_weak(v, p);
    const Vector flux = corrector_load_flux(v, trace, p);
    EXPECT_LE((weak - flux).cwiseAbs().maxCoeff(), 1e-10);
}

INSTANTIATE_TEST_SUITE_P(Parameters, TwoPathLoad, ::testing::Range(0, 3));

TEST(Corrector, SeparableReferenceConverges)
{
    // v = cos(pi x1): w = C cos(pi x1) cosh(lam (x2 + 1)), lam^2 = pi^2 - 1/4
    const GeometryParams p = params();
    const double lam = std::sqrt(pi * pi - 0.25);
    const double c = -0.27957777643919798;
    const auto exact = [&](double x, double y) { return c * std::cos(pi * x) * std::cosh(lam * (y + 1)); };
    std::vector<double> errors;
    for (double h : {1.0 / 8, 1.0 / 16, 1.0 / 32}) {
        const GridPtr g = build_rectangle_grid(1.0, 1.0, h);
        const TraceProfile v = TraceProfile::interpolate(trace_grid(*g), [](double x) { return std::cos(pi * x); });
        const Field w = solve_corrector_w(v, p, g);
        errors.push_back(norm(w, Reference{exact, {}}, NormKind::L2));
    }
    EXPECT_GE(std::log2(errors[0] / errors[1]), 1.8);
    EXPECT_GE(std::log2(errors[1] / errors[2]), 1.8);
}

TEST(Corrector, LoadOnForeignGridIsRejected)
{
    const GeometryParams p = params();
    const GridPtr g = build_rectangle_grid(1.0, 1.0, 0.125);
    const TraceProfile v = TraceProfile::constant(Interval1DGrid::uniform(1.0, 3), 1.0);
    EXPECT_EQ(code_of([&] { (void)solve_corrector_w(v, p, g); }), ErrorCode::GridMismatch);
}

TEST(EffectiveSystem, ConstantSourceIsAFixpoint)
{
    const GeometryParams p = params();
    const GridPtr g = build_rectangle_grid(1.0, 1.0, 0.125);
    const Source s{[](double, double) { return 1.0; }, false};
    SolveLog log;
    const EffectiveSolution e = solve_effective(g, p, s, &log);
    EXPECT_LE(max_deviation(e.u.values, -4.0), 1e-12);
    EXPECT_LE(max_deviation(e.v.values, -4.0), 1e-12);
    EXPECT_LE(e.w.values.cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(log.solves, 3);
    EXPECT_LE(log.max_residual, 1e-10);
}

TEST(ResonanceFrequency, ClosedForm)
{
    EXPECT_EQ(resonance_frequency(params(1, 1, 1)), 1.0);
    EXPECT_EQ(resonance_frequency(params(4, 1, 1)), 2.0);
    EXPECT_EQ(resonance_frequency(params(1, 2, 0.5)), 1.0);
}

TEST(ModeAmplitude, Examples)
{
    EXPECT_NEAR(mode_amplitude_ratio(0.0, params(1, 1, 1, 1e-9)), 1.0, 1e-15);
    EXPECT_NEAR(mode_amplitude_ratio(0.0, params(1, 1, 1, std::sqrt(0.5))), 2.0, 1e-14);
    EXPECT_EQ(code_of([] { (void)mode_amplitude_ratio(0.0, params(1, 1, 1, 1.0)); }), ErrorCode::ResonantMode);
}

TEST(ModeAmplitude, DependsOnlyOnResonatorCoefficient)
{
    for (double s : {0.5, 1.5, 2.0}) {
        for (double k : {0.0, pi, 2 * pi}) {
            // alpha / (LV) = 2 in every pair
            const double ref = mode_amplitude_ratio(k, params(2, 1, 1, 0.8));
            EXPECT_NEAR(mode_amplitude_ratio(k, params(2 * s, s, 1, 0.8)), ref, 1e-14 * std::abs(ref));
            EXPECT_NEAR(mode_amplitude_ratio(k, params(2 * s * s, s, s, 0.8)), ref, 1e-14 * std::abs(ref));
        }
    }
}

TEST(ResonatorGuard, WarnsNearOneDimensionalEigenvalue)
{
    std::vector<std::string> warnings;
    const WarningHandler old = set_warning_handler([&](std::string_view m) { warnings.emplace_back(m); });
    EXPECT_TRUE(guard_resonator_eigenvalue(params(1, 1, 1, std::sqrt(pi * pi + 1) * (1 + 1e-5))));
    EXPECT_FALSE(guard_resonator_eigenvalue(params(1, 1, 1, 0.5)));
    set_warning_handler(old);
    EXPECT_EQ(warnings.size(), 1u);
}

} // namespace
} // namespace perfwall
