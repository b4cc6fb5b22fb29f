#include "perfwall/errors.hpp"
#include "perfwall/fem.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

namespace perfwall {
namespace {

constexpr double pi = std::numbers::pi;

double max_asymmetry(const SparseMatrix& a)
{
    const SparseMatrix at = a.transpose();
    const SparseMatrix d = a - at;
    double m = 0.0;
    for (int k = 0; k < d.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(d, k); it; ++it) {
            m = std::max(m, std::abs(it.value()));
        }
    }
    return m;
}

double max_abs_entry(const SparseMatrix& a)
{
    double m = 0.0;
    for (int k = 0; k < a.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(a, k); it; ++it) {
            m = std::max(m, std::abs(it.value()));
        }
    }
    return m;
}

std::vector<GridPtr> property_grids()
{
    std::vector<GridPtr> grids{build_rectangle_grid(1.0, 1.0, 0.25), build_rectangle_grid(2.0, 0.5, 0.1)};
    for (double eps : {0.25, 0.125}) {
        ParamRecord r;
        r.eps = eps;
        r.alpha = 2.0;
        ResolutionPolicy res;
        res.h = eps / 2;
        const GeometryParams p = validate_params(r);
        grids.push_back(build_grid(p, res));
        grids.push_back(build_limit_grid(p, res));
    }
    return grids;
}

TEST(Assembly, UnitSquareStiffness)
{
    const GridPtr g = build_rectangle_grid(1.0, 1.0, 1.0);
    const SparseMatrix k = assemble_stiffness_2d(*g);
    ASSERT_EQ(k.rows(), 4);
    const Eigen::MatrixXd dense = Eigen::MatrixXd(k);
    // Bilinear element on [0,1]^2 (symbolic oracle): 2/3 on the diagonal,
    // -1/6 along an edge, -1/3 across the diagonal.
    for (int i = 0; i < 4; ++i) {
        EXPECT_NEAR(dense(i, i), 2.0 / 3.0, 1e-15);
    }
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            if (i == j) {
                continue;
            }
            const auto a = g->lattice(static_cast<std::size_t>(i));
            const auto b = g->lattice(static_cast<std::size_t>(j));
            const bool opposite = a[0] != b[0] && a[1] != b[1];
            EXPECT_NEAR(dense(i, j), opposite ? -1.0 / 3.0 : -1.0 / 6.0, 1e-15) << i << ' ' << j;
        }
    }
}

TEST(Assembly, UnitSquareMass)
{
    const GridPtr g = build_rectangle_grid(1.0, 1.0, 1.0);
    const Eigen::MatrixXd m = Eigen::MatrixXd(assemble_mass_2d(*g));
    for (int i = 0; i < 4; ++i) {
        EXPECT_NEAR(m(i, i), 1.0 / 9.0, 1e-15);
        EXPECT_NEAR(m.row(i).sum(), 0.25, 1e-15);
    }
}

TEST(Assembly, ZeroFrequencyZeroSourceGivesPureStiffness)
{
    const GridPtr g = build_rectangle_grid(1.0, 1.0, 0.25);
    const SparseSystem sys = assemble_helmholtz_2d(*g, 0.0, [](double, double) { return 0.0; });
    EXPECT_EQ(sys.rhs.norm(), 0.0);
    const SparseMatrix k = assemble_stiffness_2d(*g);
    EXPECT_EQ(max_abs_entry(sys.matrix - k), 0.0);
    const Vector ones = Vector::Ones(static_cast<Eigen::Index>(g->unknown_count()));
    EXPECT_LE((sys.matrix * ones).cwiseAbs().maxCoeff(), 1e-12 * max_abs_entry(k));
}

TEST(Assembly, UnitSourceSumsToArea)
{
    const GridPtr g = build_rectangle_grid(1.0, 1.0, 0.125);
    const SparseSystem sys = assemble_helmholtz_2d(*g, 0.5, [](double, double) { return 1.0; });
    EXPECT_NEAR(sys.rhs.sum(), 1.0, 1e-14);
}

TEST(Assembly, SourceOutsideOmega0IsDroppedByDefault)
{
    ParamRecord r;
    const GeometryParams p = validate_params(r);
    const GridPtr g = build_grid(p, ResolutionPolicy{});
    const auto one = [](double, double) { return 1.0; };
    const SparseSystem bulk = assemble_helmholtz_2d(*g, 0.5, one);
    EXPECT_NEAR(bulk.rhs.sum(), 1.0, 1e-13);
    const SparseSystem all = assemble_helmholtz_2d(*g, 0.5, one, AssemblyOptions{false});
    EXPECT_NEAR(all.rhs.sum() + all.rhs_low.sum(), p.domain_area(), 1e-13);
}

class MatrixProperties : public ::testing::TestWithParam<std::size_t> {};

TEST_P(MatrixProperties, ExactlySymmetric)
{
    const GridPtr g = property_grids()[GetParam()];
    EXPECT_EQ(max_asymmetry(assemble_stiffness_2d(*g)), 0.0);
    EXPECT_EQ(max_asymmetry(assemble_mass_2d(*g)), 0.0);
    const SparseSystem sys = assemble_helmholtz_2d(*g, 0.7, [](double x, double y) { return x - y; });
    EXPECT_EQ(max_asymmetry(sys.matrix), 0.0);
}

TEST_P(MatrixProperties, StiffnessAnnihilatesConstants)
{
    const GridPtr g = property_grids()[GetParam()];
    const SparseMatrix k = assemble_stiffness_2d(*g);
    const Vector ones = Vector::Ones(k.rows());
    EXPECT_LE((k * ones).cwiseAbs().maxCoeff(), 1e-12 * max_abs_entry(k));
}

TEST_P(MatrixProperties, MassSumsToArea)
{
    const GridPtr g = property_grids()[GetParam()];
    const SparseMatrix m = assemble_mass_2d(*g);
    const Vector ones = Vector::Ones(m.rows());
    EXPECT_NEAR(ones.dot(m * ones), g->active_area(), 1e-12 * g->active_area());
}

TEST_P(MatrixProperties, NoEmptyRows)
{
    const GridPtr g = property_grids()[GetParam()];
    const SparseMatrix m = assemble_mass_2d(*g);
    const Vector ones = Vector::Ones(m.rows());
    EXPECT_GT((m * ones).minCoeff(), 0.0);
}

INSTANTIATE_TEST_SUITE_P(Grids, MatrixProperties, ::testing::Range<std::size_t>(0, 6));

TEST(SolveDirect, IdentitySystem)
{
    SparseSystem sys;
    sys.matrix.resize(3, 3);
    sys.matrix.setIdentity();
    sys.rhs = Vector::Unit(3, 0);
    const SolveResult r = solve_direct(sys);
    EXPECT_EQ(r.x, Vector::Unit(3, 0));
    EXPECT_EQ(r.relative_residual, 0.0);
    EXPECT_TRUE(r.accepted());
}

TEST(SolveDirect, PureNeumannAtZeroFrequencyIsSingular)
{
    const GridPtr g = build_rectangle_grid(1.0, 1.0, 0.125);
    const SparseSystem sys = assemble_helmholtz_2d(*g, 0.0, [](double x, double) { return std::cos(pi * x); });
    try {
        (void)solve_direct(sys);
        FAIL() << "expected SingularMatrix";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SingularMatrix);
    }
}

TEST(SolveDirect, ManufacturedSystemResidual)
{
    const double omega = 0.5;
    const double kk = 2 * pi * pi;
    const GridPtr g = build_rectangle_grid(1.0, 1.0, 1.0 / 32);
    const SparseSystem sys = assemble_helmholtz_2d(
        *g, omega, [&](double x, double y) { return (kk - omega * omega) * std::cos(pi * x) * std::cos(pi * y); });
    const SolveResult r = solve_direct(sys);
    EXPECT_LE(r.relative_residual, 1e-10);
    EXPECT_TRUE(r.accepted());
}

TEST(SolveDirect, IndefiniteSystemAboveFirstEigenvalue)
{
    const double omega = 4.0; // omega^2 = 16 lies between pi^2 and 2 pi^2
    const GridPtr g = build_rectangle_grid(1.0, 1.0, 1.0 / 16);
    const SparseSystem sys = assemble_helmholtz_2d(*g, omega, [](double x, double y) { return x * x + y; });
    const SolveResult r = solve_direct(sys);
    EXPECT_LE(r.relative_residual, 1e-10);
}

TEST(Assembly1D, ConstantSolvesExactly)
{
    const Interval1DGrid g1({0.0, 0.1, 0.35, 0.4, 0.9, 1.0});
    const std::vector<double> g(g1.size(), 1.0);
    const SparseSystem sys = assemble_1d_v(g1, 1.0, g);
    const SolveResult r = solve_direct(sys);
    for (Eigen::Index i = 0; i < r.x.size(); ++i) {
        EXPECT_NEAR(r.x[i], 1.0, 1e-14);
    }
}

TEST(Assembly1D, ZeroCoefficientIsSingular)
{
    const Interval1DGrid g1 = Interval1DGrid::uniform(1.0, 8);
    const std::vector<double> g(g1.size(), 0.0);
    const SparseSystem sys = assemble_1d_v(g1, 0.0, g);
    try {
        (void)solve_direct(sys);
        FAIL() << "expected SingularMatrix";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SingularMatrix);
    }
}

TEST(Assembly1D, CosineSourceConvergesAtSecondOrder)
{
    // -v'' + v = cos(pi x) with Neumann ends: v = cos(pi x) / (1 + pi^2)
    const double amplitude = 0.091999668350375232;
    std::vector<double> errors;
    for (std::size_t n : {16u, 32u, 64u}) {
        const Interval1DGrid g1 = Interval1DGrid::uniform(1.0, n);
        std::vector<double> g;
        for (double x : g1.nodes()) {
            g.push_back(std::cos(pi * x));
        }
        const SolveResult r = solve_direct(assemble_1d_v(g1, 1.0, g));
        errors.push_back(norm_1d(g1, std::span<const double>(r.x.data(), static_cast<std::size_t>(r.x.size())),
                                 [&](double x) { return amplitude * std::cos(pi * x); }, NormKind::L2));
    }
    EXPECT_GE(std::log2(errors[0] / errors[1]), 1.8);
    EXPECT_GE(std::log2(errors[1] / errors[2]), 1.8);
}

TEST(Norms, IdenticalFieldsGiveZero)
{
    const GridPtr g = build_rectangle_grid(1.0, 1.0, 0.25);
    const Field f = Field::interpolate(g, [](double x, double y) { return x * y + 1; });
    EXPECT_EQ(norm(f, f, NormKind::L2), 0.0);
    EXPECT_EQ(norm(f, f, NormKind::L1), 0.0);
    EXPECT_EQ(norm(f, f, NormKind::H1Semi), 0.0);
}

TEST(Norms, LinearFieldAgainstZero)
{
    const GridPtr g = build_rectangle_grid(1.0, 1.0, 0.25);
    const Field f = Field::interpolate(g, [](double x, double) { return x; });
    // sqrt(1/3) from the symbolic oracle
    EXPECT_NEAR(norm(f, NormKind::L2), 0.57735026918962576, 1e-12);
    EXPECT_NEAR(norm(f, NormKind::H1Semi), 1.0, 1e-12);
    EXPECT_NEAR(norm(f, NormKind::L1), 0.5, 1e-12);
    const Reference zero{[](double, double) { return 0.0; },
                         [](double, double) { return std::array<double, 2>{0.0, 0.0}; }};
    EXPECT_NEAR(norm(f, zero, NormKind::L2), 0.57735026918962576, 1e-12);
    EXPECT_NEAR(norm(f, zero, NormKind::H1Semi), 1.0, 1e-12);
}

TEST(Norms, MismatchedGridsAreRejected)
{
    const Field a = Field::constant(build_rectangle_grid(1.0, 1.0, 0.25), 1.0);
    const Field b = Field::constant(build_rectangle_grid(1.0, 1.0, 0.5), 1.0);
    try {
        (void)norm(a, b, NormKind::L2);
        FAIL() << "expected GridMismatch";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::GridMismatch);
    }
}

TEST(Norms, OneDimensional)
{
    const Interval1DGrid g1 = Interval1DGrid::uniform(1.0, 4);
    const std::vector<double> v{0.0, 0.25, 0.5, 0.75, 1.0};
    const auto zero = [](double) { return 0.0; };
    EXPECT_NEAR(norm_1d(g1, v, zero, NormKind::L2), std::sqrt(1.0 / 3.0), 1e-14);
    EXPECT_NEAR(norm_1d(g1, v, zero, NormKind::L1), 0.5, 1e-14);
    EXPECT_NEAR(norm_1d(g1, v, zero, NormKind::H1Semi, zero), 1.0, 1e-14);
}

TEST(EigenGuard, ClosedFormProximity)
{
    const EigenProximity e = neumann_proximity(1.0, 1.0, pi);
    EXPECT_NEAR(e.eigenvalue, pi * pi, 1e-12);
    EXPECT_NEAR(e.relative_gap, 0.0, 1e-15);

    std::vector<std::string> warnings;
    const WarningHandler old = set_warning_handler([&](std::string_view m) { warnings.emplace_back(m); });
    EXPECT_TRUE(guard_neumann_eigenvalue(1.0, 1.0, pi * (1 + 1e-5)));
    EXPECT_FALSE(guard_neumann_eigenvalue(1.0, 1.0, 0.5));
    set_warning_handler(old);
    EXPECT_EQ(warnings.size(), 1u);
}

TEST(MatrixDump, CoordinateLines)
{
    SparseMatrix m(2, 2);
    m.insert(0, 0) = 1.5;
    m.insert(1, 0) = -2.0;
    m.makeCompressed();
    std::ostringstream os;
    write_matrix_dump(os, m);
    EXPECT_EQ(os.str(), "0 0 1.5\n1 0 -2\n");
}

} // namespace
} // namespace perfwall
