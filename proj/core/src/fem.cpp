#include "perfwall/fem.hpp"

#include "perfwall/errors.hpp"

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>

#include <umfpack.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>

namespace perfwall {

namespace {

// Two-point Gauss rule on [0, 1].
constexpr double kGaussLo = 0.5 - 0.5 / std::numbers::sqrt3;
constexpr double kGaussHi = 0.5 + 0.5 / std::numbers::sqrt3;
constexpr std::array<double, 2> kGauss{kGaussLo, kGaussHi};

using Real = long double;
using Local4 = std::array<std::array<Real, 4>, 4>;
using LongMatrix = Eigen::SparseMatrix<Real>;
using Extended = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

// Local node order: l = d1 + 2*d2 for the corner (i1 + d1, i2 + d2).
struct CellMatrices {
    Local4 stiffness;
    Local4 mass;
};

// Entries are formed in extended precision; see split().
CellMatrices cell_matrices(Real hx, Real hy)
{
    const Real k1x[2][2] = {{1 / hx, -1 / hx}, {-1 / hx, 1 / hx}};
    const Real k1y[2][2] = {{1 / hy, -1 / hy}, {-1 / hy, 1 / hy}};
    const Real m1x[2][2] = {{hx / 3, hx / 6}, {hx / 6, hx / 3}};
    const Real m1y[2][2] = {{hy / 3, hy / 6}, {hy / 6, hy / 3}};
    CellMatrices out{};
    for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
            const int ax = a % 2, ay = a / 2, bx = b % 2, by = b / 2;
            out.stiffness[a][b] = k1x[ax][bx] * m1y[ay][by] + m1x[ax][bx] * k1y[ay][by];
            out.mass[a][b] = m1x[ax][bx] * m1y[ay][by];
        }
    }
    return out;
}

std::array<std::ptrdiff_t, 4> cell_nodes(const Grid& g, std::size_t i1, std::size_t i2)
{
    return {g.node(i1, i2), g.node(i1 + 1, i2), g.node(i1, i2 + 1), g.node(i1 + 1, i2 + 1)};
}

// Lower-triangular pattern of the bilinear coupling graph. Unknowns are
// numbered row by row, so the lower neighbors of a node are its right
// neighbor and the three nodes in the next lattice row.
SparseMatrix lower_pattern(const Grid& g)
{
    const auto n = static_cast<Eigen::Index>(g.unknown_count());
    const auto n1 = static_cast<std::ptrdiff_t>(g.cells_x1());
    const auto n2 = static_cast<std::ptrdiff_t>(g.cells_x2());
    const auto cell_active = [&](std::ptrdiff_t c1, std::ptrdiff_t c2) {
        return c1 >= 0 && c2 >= 0 && c1 < n1 && c2 < n2 &&
               g.active(static_cast<std::size_t>(c1), static_cast<std::size_t>(c2));
    };

    SparseMatrix lower(n, n);
    lower.reserve(5 * n);
    for (Eigen::Index j = 0; j < n; ++j) {
        lower.startVec(j);
        const auto [u1, u2] = g.lattice(static_cast<std::size_t>(j));
        const auto i1 = static_cast<std::ptrdiff_t>(u1);
        const auto i2 = static_cast<std::ptrdiff_t>(u2);
        const std::array<std::array<std::ptrdiff_t, 2>, 5> offsets{{{0, 0}, {1, 0}, {-1, 1}, {0, 1}, {1, 1}}};
        for (const auto& [d1, d2] : offsets) {
            const std::ptrdiff_t k1 = i1 + d1;
            const std::ptrdiff_t k2 = i2 + d2;
            if (k1 < 0 || k1 > n1 || k2 > n2) {
                continue;
            }
            // cells containing both nodes
            bool shared = false;
            for (std::ptrdiff_t c2 = std::max(i2, k2) - 1; c2 <= std::min(i2, k2) && !shared; ++c2) {
                for (std::ptrdiff_t c1 = std::max(i1, k1) - 1; c1 <= std::min(i1, k1) && !shared; ++c1) {
                    shared = cell_active(c1, c2);
                }
            }
            if (!shared) {
                continue;
            }
            const std::ptrdiff_t row = g.node(static_cast<std::size_t>(k1), static_cast<std::size_t>(k2));
            lower.insertBack(row, j) = 0.0;
        }
    }
    lower.finalize();
    return lower;
}

template <typename Matrix>
Matrix symmetrize(const Matrix& lower)
{
    Matrix upper = lower.template triangularView<Eigen::StrictlyLower>().transpose();
    Matrix full = lower + upper;
    full.makeCompressed();
    return full;
}

// Assembled values are kept as a double plus the double nearest to the
// remainder. With strongly anisotropic cells the rounding of a single entry
// is far above the size of the loads, so for example K 1 = 0 only survives
// when the remainder is kept.
std::pair<SparseMatrix, SparseMatrix> split(const LongMatrix& full)
{
    SparseMatrix hi = full.cast<double>();
    SparseMatrix lo = (full - hi.cast<Real>()).cast<double>();
    return {std::move(hi), std::move(lo)};
}

std::pair<Vector, Vector> split(const Extended& full)
{
    Vector hi = full.cast<double>();
    Vector lo = (full - hi.cast<Real>()).cast<double>();
    return {std::move(hi), std::move(lo)};
}

template <typename CellWeights>
LongMatrix assemble_matrix(const Grid& g, CellWeights&& weights)
{
    LongMatrix lower = lower_pattern(g).cast<Real>();
    const auto x1 = g.x1_lines();
    const auto x2 = g.x2_lines();
    for (std::size_t i2 = 0; i2 < g.cells_x2(); ++i2) {
        for (std::size_t i1 = 0; i1 < g.cells_x1(); ++i1) {
            if (!g.active(i1, i2)) {
                continue;
            }
            const CellMatrices cm = cell_matrices(x1[i1 + 1] - x1[i1], x2[i2 + 1] - x2[i2]);
            const auto nodes = cell_nodes(g, i1, i2);
            for (int a = 0; a < 4; ++a) {
                for (int b = 0; b < 4; ++b) {
                    if (nodes[a] < nodes[b]) {
                        continue;
                    }
                    lower.coeffRef(nodes[a], nodes[b]) += weights(cm, a, b);
                }
            }
        }
    }
    return symmetrize(lower);
}

template <typename SourceAt>
Extended assemble_rhs(const Grid& g, SourceAt&& source_at, AssemblyOptions options)
{
    Extended rhs = Extended::Zero(static_cast<Eigen::Index>(g.unknown_count()));
    const auto x1 = g.x1_lines();
    const auto x2 = g.x2_lines();
    for (std::size_t i2 = 0; i2 < g.cells_x2(); ++i2) {
        for (std::size_t i1 = 0; i1 < g.cells_x1(); ++i1) {
            if (!g.active(i1, i2)) {
                continue;
            }
            if (options.f_support_omega0 && g.region(i1, i2) != Region::Omega0) {
                continue;
            }
            const double hx = x1[i1 + 1] - x1[i1];
            const double hy = x2[i2 + 1] - x2[i2];
            const auto nodes = cell_nodes(g, i1, i2);
            for (double t : kGauss) {
                for (double s : kGauss) {
                    const Real w = Real{0.25} * hx * hy;
                    const Real fq = source_at(i1, i2, s, t, x1[i1] + s * hx, x2[i2] + t * hy);
                    const Real phi[4] = {(1 - s) * (1 - t), s * (1 - t), (1 - s) * t, s * t};
                    for (int a = 0; a < 4; ++a) {
                        rhs[nodes[a]] += w * fq * phi[a];
                    }
                }
            }
        }
    }
    return rhs;
}

double bilinear(const std::array<double, 4>& v, double s, double t)
{
    return (1 - s) * (1 - t) * v[0] + s * (1 - t) * v[1] + (1 - s) * t * v[2] + s * t * v[3];
}

std::array<double, 4> cell_values(const Field& f, std::size_t i1, std::size_t i2)
{
    const auto nodes = cell_nodes(*f.grid, i1, i2);
    return {f.values[nodes[0]], f.values[nodes[1]], f.values[nodes[2]], f.values[nodes[3]]};
}

std::string sci(double v)
{
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << v;
    return os.str();
}

} // namespace

// ---------------------------------------------------------------------------
// Field

Field::Field(GridPtr g, Vector v)
    : grid(std::move(g))
    , values(std::move(v))
{
    if (!grid) {
        fail(ErrorCode::GridMismatch, "field without a grid");
    }
    if (static_cast<std::size_t>(values.size()) != grid->unknown_count()) {
        fail(ErrorCode::GridMismatch, "field length " + std::to_string(values.size()) + " does not match " +
                                          std::to_string(grid->unknown_count()) + " unknowns");
    }
}

Field Field::interpolate(GridPtr grid, const ScalarFunction& fn)
{
    Vector v(static_cast<Eigen::Index>(grid->unknown_count()));
    for (std::size_t k = 0; k < grid->unknown_count(); ++k) {
        const auto [x1, x2] = grid->coords(k);
        v[static_cast<Eigen::Index>(k)] = fn(x1, x2);
    }
    return Field(std::move(grid), std::move(v));
}

Field Field::constant(GridPtr grid, double value)
{
    const auto n = static_cast<Eigen::Index>(grid->unknown_count());
    return Field(std::move(grid), Vector::Constant(n, value));
}

double Field::value_in_cell(std::size_t i1, std::size_t i2, double x1, double x2) const
{
    const auto xl = grid->x1_lines();
    const auto yl = grid->x2_lines();
    const double s = (x1 - xl[i1]) / (xl[i1 + 1] - xl[i1]);
    const double t = (x2 - yl[i2]) / (yl[i2 + 1] - yl[i2]);
    return bilinear(cell_values(*this, i1, i2), s, t);
}

// ---------------------------------------------------------------------------
// 2D assembly

SparseMatrix assemble_stiffness_2d(const Grid& grid)
{
    return split(assemble_matrix(grid, [](const CellMatrices& cm, int a, int b) { return cm.stiffness[a][b]; })).first;
}

SparseMatrix assemble_mass_2d(const Grid& grid)
{
    return split(assemble_matrix(grid, [](const CellMatrices& cm, int a, int b) { return cm.mass[a][b]; })).first;
}

SparseSystem assemble_helmholtz_2d(const Grid& grid, double omega, const ScalarFunction& f, AssemblyOptions options)
{
    const Real w2 = Real{omega} * omega;
    SparseSystem sys;
    std::tie(sys.matrix, sys.matrix_low) = split(assemble_matrix(
        grid, [w2](const CellMatrices& cm, int a, int b) { return cm.stiffness[a][b] - w2 * cm.mass[a][b]; }));
    std::tie(sys.rhs, sys.rhs_low) = split(assemble_rhs(
        grid, [&](std::size_t, std::size_t, double, double, double x1, double x2) { return f(x1, x2); }, options));
    return sys;
}

SparseSystem assemble_helmholtz_2d(const Grid& grid, double omega, const Field& f, AssemblyOptions options)
{
    if (!f.grid->same_layout(grid)) {
        fail(ErrorCode::GridMismatch, "source field lives on a different grid");
    }
    const Real w2 = Real{omega} * omega;
    SparseSystem sys;
    std::tie(sys.matrix, sys.matrix_low) = split(assemble_matrix(
        grid, [w2](const CellMatrices& cm, int a, int b) { return cm.stiffness[a][b] - w2 * cm.mass[a][b]; }));
    std::tie(sys.rhs, sys.rhs_low) = split(assemble_rhs(
        grid,
        [&](std::size_t i1, std::size_t i2, double s, double t, double, double) {
            return bilinear(cell_values(f, i1, i2), s, t);
        },
        options));
    return sys;
}

// ---------------------------------------------------------------------------
// Direct solver

namespace {

// The system to extended precision: matrix + matrix_low, rhs + rhs_low.
// Above this size the simplicial LDL^T is slower than the multifrontal LU,
// which works on dense frontal blocks.
constexpr Eigen::Index kLdltMaxUnknowns = 200'000;

const std::string kSingularHint = " (omega is at or numerically near a discrete eigenvalue; shift omega)";

// UMFPACK LU with its default (symmetric when the pattern is) strategy.
// Refinement is left to the caller.
class UmfpackLu {
public:
    explicit UmfpackLu(const SparseMatrix& a)
    {
        if (!a.isCompressed()) {
            owned_ = a;
            owned_.makeCompressed();
        }
        a_ = a.isCompressed() ? &a : &owned_;
        umfpack_di_defaults(control_);
        control_[UMFPACK_IRSTEP] = 0;
        const int n = static_cast<int>(a_->rows());
        int status = umfpack_di_symbolic(n, n, a_->outerIndexPtr(), a_->innerIndexPtr(), a_->valuePtr(), &symbolic_,
                                         control_, info_);
        if (status != UMFPACK_OK) {
            fail(ErrorCode::FactorizationFailure, "UMFPACK symbolic analysis failed (status " + std::to_string(status) + ")");
        }
        status = umfpack_di_numeric(a_->outerIndexPtr(), a_->innerIndexPtr(), a_->valuePtr(), symbolic_, &numeric_,
                                    control_, info_);
        if (status == UMFPACK_WARNING_singular_matrix) {
            fail(ErrorCode::SingularMatrix, "zero pivot in LU factorization" + kSingularHint);
        }
        if (status != UMFPACK_OK) {
            fail(ErrorCode::FactorizationFailure, "UMFPACK factorization failed (status " + std::to_string(status) + ")");
        }
    }
    UmfpackLu(const UmfpackLu&) = delete;
    UmfpackLu& operator=(const UmfpackLu&) = delete;
    ~UmfpackLu()
    {
        umfpack_di_free_numeric(&numeric_);
        umfpack_di_free_symbolic(&symbolic_);
    }

    /// min |U_ii| / max |U_ii|.
    [[nodiscard]] double pivot_ratio() const { return info_[UMFPACK_RCOND]; }

    [[nodiscard]] Vector solve(const Vector& b) const
    {
        Vector x(b.size());
        double info[UMFPACK_INFO];
        const int status = umfpack_di_solve(UMFPACK_A, a_->outerIndexPtr(), a_->innerIndexPtr(), a_->valuePtr(),
                                            x.data(), b.data(), numeric_, control_, info);
        if (status != UMFPACK_OK) {
            fail(ErrorCode::FactorizationFailure, "UMFPACK solve failed (status " + std::to_string(status) + ")");
        }
        return x;
    }

private:
    SparseMatrix owned_;
    const SparseMatrix* a_ = nullptr;
    void* symbolic_ = nullptr;
    void* numeric_ = nullptr;
    double control_[UMFPACK_CONTROL];
    double info_[UMFPACK_INFO];
};

double seconds_since(std::chrono::steady_clock::time_point start)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void check_pivot_ratio(double ratio, const char* factorization)
{
    if (!(ratio > kSingularPivotRatio)) {
        fail(ErrorCode::SingularMatrix, std::string(factorization) + " pivot ratio " + sci(ratio) + " below " +
                                            sci(kSingularPivotRatio) + kSingularHint);
    }
}

struct ExtendedSystem {
    LongMatrix A;
    Extended b;
};

ExtendedSystem extended(const SparseSystem& sys)
{
    ExtendedSystem e{sys.matrix.cast<Real>(), sys.rhs.cast<Real>()};
    if (sys.matrix_low.rows() == sys.matrix.rows() && sys.matrix_low.cols() == sys.matrix.cols()) {
        e.A += sys.matrix_low.cast<Real>();
    }
    if (sys.rhs_low.size() == sys.rhs.size()) {
        e.b += sys.rhs_low.cast<Real>();
    }
    return e;
}

Extended residual(const ExtendedSystem& sys, const Extended& x) { return sys.b - sys.A * x; }

double relative(const Extended& r, double b_norm) { return static_cast<double>(r.norm()) / b_norm; }

// Mixed-precision refinement: corrections come from the double factorization,
// the iterate and its residual are kept in extended precision.
template <typename Solver>
int refine(const Solver& solver, const ExtendedSystem& sys, double b_norm, Extended& x, double& rel)
{
    Extended r = residual(sys, x);
    rel = relative(r, b_norm);
    int steps = 0;
    for (; steps < 10 && rel > 0.0; ++steps) {
        const Vector d = solver.solve(r.cast<double>().eval());
        Extended candidate = x + d.cast<long double>();
        Extended r_next = residual(sys, candidate);
        const double next = relative(r_next, b_norm);
        if (!(next < rel)) {
            break;
        }
        x = std::move(candidate);
        r = std::move(r_next);
        rel = next;
    }
    return steps;
}

void store(const Extended& x, const ExtendedSystem& sys, double b_norm, SolveResult& out)
{
    std::tie(out.x, out.x_low) = split(x);
    out.rounded_residual = relative(residual(sys, out.x.cast<Real>()), b_norm);
}

} // namespace

bool SolveResult::accepted() const noexcept { return relative_residual <= kResidualTolerance; }

SolveResult solve_direct(const SparseSystem& sys)
{
    const SparseMatrix& A = sys.matrix;
    const Vector& b = sys.rhs;
    if (A.rows() != A.cols() || A.rows() != b.size()) {
        fail(ErrorCode::FactorizationFailure, "system dimensions do not match");
    }

    SolveResult result;
    const ExtendedSystem ext = extended(sys);
    const double b_norm = static_cast<double>(ext.b.norm());
    result.relative_residual = std::numeric_limits<double>::infinity();
    Extended x;

    if (A.rows() <= kLdltMaxUnknowns) {
        const auto start = std::chrono::steady_clock::now();
        Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
        ldlt.compute(A);
        result.factor_seconds = seconds_since(start);
        if (ldlt.info() == Eigen::NumericalIssue) {
            fail(ErrorCode::SingularMatrix, "zero pivot in LDL^T factorization" + kSingularHint);
        }
        if (ldlt.info() != Eigen::Success) {
            fail(ErrorCode::FactorizationFailure, "LDL^T factorization failed");
        }
        const Vector d = ldlt.vectorD().cwiseAbs();
        check_pivot_ratio(d.minCoeff() / d.maxCoeff(), "LDL^T");
        if (b_norm == 0.0) {
            result.x = Vector::Zero(b.size());
            result.x_low = Vector::Zero(b.size());
            result.relative_residual = 0.0;
            return result;
        }
        x = ldlt.solve(b).cast<Real>();
        result.refinement_steps = refine(ldlt, ext, b_norm, x, result.relative_residual);
        if (std::isfinite(result.relative_residual) && result.relative_residual <= kResidualTolerance) {
            store(x, ext, b_norm, result);
            return result;
        }
    }

    const auto start = std::chrono::steady_clock::now();
    const UmfpackLu lu(A);
    const double lu_seconds = seconds_since(start);
    check_pivot_ratio(lu.pivot_ratio(), "LU");
    if (b_norm == 0.0) {
        result.factor_seconds = lu_seconds;
        result.x = Vector::Zero(b.size());
        result.x_low = Vector::Zero(b.size());
        result.relative_residual = 0.0;
        return result;
    }
    Extended y = lu.solve(b).cast<Real>();
    double rel = 0.0;
    const int steps = refine(lu, ext, b_norm, y, rel);
    if (!std::isfinite(rel) && !std::isfinite(result.relative_residual)) {
        fail(ErrorCode::FactorizationFailure, "solution is not finite");
    }
    if (rel < result.relative_residual || !std::isfinite(result.relative_residual)) {
        x = std::move(y);
        result.relative_residual = rel;
        result.refinement_steps = steps;
        result.factor_seconds = lu_seconds;
        result.used_fallback = A.rows() <= kLdltMaxUnknowns;
    }
    if (result.relative_residual > kResidualTolerance) {
        warn("relative residual " + sci(result.relative_residual) + " exceeds " + sci(kResidualTolerance));
    }
    store(x, ext, b_norm, result);
    return result;
}

// ---------------------------------------------------------------------------
// 1D

namespace {

LongMatrix tridiagonal(const Interval1DGrid& grid1, Real diag_scale_k, Real diag_scale_m)
{
    const auto n = static_cast<Eigen::Index>(grid1.size());
    LongMatrix lower(n, n);
    lower.reserve(2 * n);
    for (Eigen::Index j = 0; j < n; ++j) {
        lower.startVec(j);
        Real diag = 0;
        if (j > 0) {
            const Real h = grid1.element_size(static_cast<std::size_t>(j - 1));
            diag += diag_scale_k / h + diag_scale_m * h / 3;
        }
        Real off = 0;
        if (j + 1 < n) {
            const Real h = grid1.element_size(static_cast<std::size_t>(j));
            diag += diag_scale_k / h + diag_scale_m * h / 3;
            off = -diag_scale_k / h + diag_scale_m * h / 6;
        }
        lower.insertBack(j, j) = diag;
        if (j + 1 < n) {
            lower.insertBack(j + 1, j) = off;
        }
    }
    lower.finalize();
    return symmetrize(lower);
}

} // namespace

SparseMatrix stiffness_1d(const Interval1DGrid& grid1) { return split(tridiagonal(grid1, 1, 0)).first; }
SparseMatrix mass_1d(const Interval1DGrid& grid1) { return split(tridiagonal(grid1, 0, 1)).first; }

SparseSystem assemble_1d_v(const Interval1DGrid& grid1, double c0, std::span<const double> g)
{
    if (g.size() != grid1.size()) {
        fail(ErrorCode::GridMismatch, "right-hand side profile does not match the interval grid");
    }
    SparseSystem sys;
    std::tie(sys.matrix, sys.matrix_low) = split(tridiagonal(grid1, 1, c0));
    const Eigen::Map<const Vector> gv(g.data(), static_cast<Eigen::Index>(g.size()));
    std::tie(sys.rhs, sys.rhs_low) = split((tridiagonal(grid1, 0, 1) * gv.cast<Real>()).eval());
    return sys;
}

// ---------------------------------------------------------------------------
// Norms

namespace {

struct NormAccumulator {
    NormKind kind;
    double sum = 0.0;

    void add(double weight, double e, double e1, double e2)
    {
        switch (kind) {
        case NormKind::L2: sum += weight * e * e; break;
        case NormKind::L1: sum += weight * std::abs(e); break;
        case NormKind::H1Semi: sum += weight * (e1 * e1 + e2 * e2); break;
        }
    }
    [[nodiscard]] double result() const { return kind == NormKind::L1 ? sum : std::sqrt(sum); }
};

template <typename ReferenceAt>
double norm_impl(const Field& field, NormKind kind, ReferenceAt&& ref_at)
{
    const Grid& g = *field.grid;
    const auto x1 = g.x1_lines();
    const auto x2 = g.x2_lines();
    NormAccumulator acc{kind};
    for (std::size_t i2 = 0; i2 < g.cells_x2(); ++i2) {
        for (std::size_t i1 = 0; i1 < g.cells_x1(); ++i1) {
            if (!g.active(i1, i2)) {
                continue;
            }
            const double hx = x1[i1 + 1] - x1[i1];
            const double hy = x2[i2 + 1] - x2[i2];
            const auto v = cell_values(field, i1, i2);
            for (double t : kGauss) {
                for (double s : kGauss) {
                    const double uh = bilinear(v, s, t);
                    const double d1 = ((1 - t) * (v[1] - v[0]) + t * (v[3] - v[2])) / hx;
                    const double d2 = ((1 - s) * (v[2] - v[0]) + s * (v[3] - v[1])) / hy;
                    const auto [r, r1, r2] = ref_at(i1, i2, s, t, x1[i1] + s * hx, x2[i2] + t * hy);
                    acc.add(0.25 * hx * hy, uh - r, d1 - r1, d2 - r2);
                }
            }
        }
    }
    return acc.result();
}

} // namespace

double norm(const Field& field, const Reference& reference, NormKind kind)
{
    if (kind == NormKind::H1Semi && !reference.gradient) {
        fail(ErrorCode::GridMismatch, "H1 seminorm against a callable needs its gradient");
    }
    return norm_impl(field, kind, [&](std::size_t, std::size_t, double, double, double x, double y) {
        const double v = reference.value ? reference.value(x, y) : 0.0;
        std::array<double, 2> grad{0.0, 0.0};
        if (kind == NormKind::H1Semi) {
            grad = reference.gradient(x, y);
        }
        return std::array<double, 3>{v, grad[0], grad[1]};
    });
}

double norm(const Field& field, const Field& reference, NormKind kind)
{
    if (field.grid != reference.grid && !field.grid->same_layout(*reference.grid)) {
        fail(ErrorCode::GridMismatch, "norm of fields on different grids");
    }
    Field diff(field.grid, field.values - reference.values);
    return norm(diff, kind);
}

double norm(const Field& field, NormKind kind)
{
    return norm_impl(field, kind, [](std::size_t, std::size_t, double, double, double, double) {
        return std::array<double, 3>{0.0, 0.0, 0.0};
    });
}

double norm_1d(const Interval1DGrid& grid1, std::span<const double> values, const std::function<double(double)>& reference,
               NormKind kind, const std::function<double(double)>& reference_derivative)
{
    if (values.size() != grid1.size()) {
        fail(ErrorCode::GridMismatch, "profile length does not match the interval grid");
    }
    if (kind == NormKind::H1Semi && !reference_derivative && reference) {
        fail(ErrorCode::GridMismatch, "H1 seminorm against a callable needs its derivative");
    }
    const auto nodes = grid1.nodes();
    NormAccumulator acc{kind};
    for (std::size_t e = 0; e < grid1.element_count(); ++e) {
        const double h = grid1.element_size(e);
        const double slope = (values[e + 1] - values[e]) / h;
        for (double s : kGauss) {
            const double x = nodes[e] + s * h;
            const double uh = (1 - s) * values[e] + s * values[e + 1];
            const double r = reference ? reference(x) : 0.0;
            const double r1 = reference_derivative ? reference_derivative(x) : 0.0;
            acc.add(0.5 * h, uh - r, slope - r1, 0.0);
        }
    }
    return acc.result();
}

// ---------------------------------------------------------------------------
// Eigenvalue guard

EigenProximity neumann_proximity(double a, double b, double omega)
{
    const double w2 = omega * omega;
    EigenProximity best{0.0, std::numeric_limits<double>::infinity()};
    const double pi2 = std::numbers::pi * std::numbers::pi;
    for (int m = 0; m <= 20; ++m) {
        for (int n = 0; n <= 20; ++n) {
            const double lambda = pi2 * (m * m / (a * a) + n * n / (b * b));
            const double gap = std::abs(w2 - lambda) / std::max(lambda, w2);
            if (gap < best.relative_gap) {
                best = {lambda, gap};
            }
        }
    }
    return best;
}

bool guard_neumann_eigenvalue(double a, double b, double omega)
{
    const EigenProximity prox = neumann_proximity(a, b, omega);
    if (prox.relative_gap < 1e-3) {
        warn("omega^2 = " + sci(omega * omega) + " lies within relative " + sci(prox.relative_gap) +
             " of the Neumann eigenvalue " + sci(prox.eigenvalue));
        return true;
    }
    return false;
}

void write_matrix_dump(std::ostream& os, const SparseMatrix& matrix)
{
    const auto old_precision = os.precision(17);
    for (Eigen::Index j = 0; j < matrix.outerSize(); ++j) {
        for (SparseMatrix::InnerIterator it(matrix, j); it; ++it) {
            os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
        }
    }
    os.precision(old_precision);
}

} // namespace perfwall
