#pragma once

#include "perfwall/geometry.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <array>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>

namespace perfwall {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;
using ScalarFunction = std::function<double(double, double)>;
using GradientFunction = std::function<std::array<double, 2>(double, double)>;

/// Assembled linear system. The matrix is stored in full (both triangles) and
/// is exactly symmetric: each off-diagonal pair is accumulated once.
struct SparseSystem {
    SparseMatrix matrix;
    Vector rhs;
    /// Assembly remainders: matrix + matrix_low and rhs + rhs_low hold the
    /// assembled values to extended precision. Empty means zero.
    SparseMatrix matrix_low;
    Vector rhs_low;

    [[nodiscard]] std::size_t dimension() const noexcept { return static_cast<std::size_t>(rhs.size()); }
};

/// Bilinear finite-element function: one coefficient per unknown of `grid`.
struct Field {
    Field(GridPtr grid, Vector values);

    [[nodiscard]] static Field interpolate(GridPtr grid, const ScalarFunction& fn);
    [[nodiscard]] static Field constant(GridPtr grid, double value);

    /// Value of the interpolant at a point inside active cell (i1, i2).
    [[nodiscard]] double value_in_cell(std::size_t i1, std::size_t i2, double x1, double x2) const;

    GridPtr grid;
    Vector values;
};

struct AssemblyOptions {
    /// Drop source contributions from cells outside Omega0.
    bool f_support_omega0 = true;
};

/// K - omega^2 M and rhs_i = \int f phi_i (2x2 Gauss per cell). Neumann
/// conditions are natural, nothing is modified at the boundary.
[[nodiscard]] SparseSystem assemble_helmholtz_2d(const Grid& grid, double omega, const ScalarFunction& f,
                                                 AssemblyOptions options = {});
[[nodiscard]] SparseSystem assemble_helmholtz_2d(const Grid& grid, double omega, const Field& f,
                                                 AssemblyOptions options = {});

[[nodiscard]] SparseMatrix assemble_stiffness_2d(const Grid& grid);
[[nodiscard]] SparseMatrix assemble_mass_2d(const Grid& grid);

struct SolveResult {
    Vector x;                       ///< solution rounded to double
    Vector x_low;                   ///< x + x_low is the refined solution
    double relative_residual = 0.0; ///< ||A (x + x_low) - b|| / ||b||
    double rounded_residual = 0.0;  ///< same for x alone
    int refinement_steps = 0;
    double factor_seconds = 0.0;    ///< factorization that produced x
    bool used_fallback = false;     ///< LDL^T was rejected and LU kept

    [[nodiscard]] bool accepted() const noexcept;
};

/// Sparse LDL^T with AMD ordering for systems up to 200k unknowns, with a
/// multifrontal LU (UMFPACK) as fallback and for larger systems, followed by
/// mixed-precision iterative refinement. Throws SingularMatrix when the pivot
/// ratio is at most kSingularPivotRatio (frequency at or near a discrete
/// eigenvalue) and FactorizationFailure when no finite solution is produced.
/// A residual above kResidualTolerance is reported, not thrown.
[[nodiscard]] SolveResult solve_direct(const SparseSystem& sys);

inline constexpr double kResidualTolerance = 1e-10;
inline constexpr double kSingularPivotRatio = 1e-11;

// 1D linear elements ---------------------------------------------------------

[[nodiscard]] SparseMatrix stiffness_1d(const Interval1DGrid& grid1);
[[nodiscard]] SparseMatrix mass_1d(const Interval1DGrid& grid1);

/// Stiffness + c0 * mass with rhs = mass * g (g sampled at the nodes).
/// Neumann at both ends is natural.
[[nodiscard]] SparseSystem assemble_1d_v(const Interval1DGrid& grid1, double c0, std::span<const double> g);

// Norms ----------------------------------------------------------------------

enum class NormKind { L2, L1, H1Semi };

struct Reference {
    ScalarFunction value;
    GradientFunction gradient; ///< required for NormKind::H1Semi
};

/// ||field - reference|| over the active cells, 2x2 Gauss per cell.
[[nodiscard]] double norm(const Field& field, const Reference& reference, NormKind kind);
/// Both fields must live on the same grid layout (GridMismatch otherwise).
[[nodiscard]] double norm(const Field& field, const Field& reference, NormKind kind);
[[nodiscard]] double norm(const Field& field, NormKind kind);

/// 1D counterparts over a piecewise-linear nodal function.
[[nodiscard]] double norm_1d(const Interval1DGrid& grid1, std::span<const double> values,
                             const std::function<double(double)>& reference, NormKind kind,
                             const std::function<double(double)>& reference_derivative = {});

// Eigenvalue proximity -------------------------------------------------------

struct EigenProximity {
    double eigenvalue;   ///< nearest closed-form eigenvalue
    double relative_gap; ///< |omega^2 - eigenvalue| / max(eigenvalue, omega^2)
};

/// Nearest Neumann-Laplace eigenvalue pi^2 (m^2/a^2 + n^2/b^2), m, n <= 20,
/// of the rectangle (0,a) x (-b,0) relative to omega^2.
[[nodiscard]] EigenProximity neumann_proximity(double a, double b, double omega);

/// Warns through perfwall::warn when the relative gap is below 1e-3.
/// Returns true when a warning was issued.
bool guard_neumann_eigenvalue(double a, double b, double omega);

/// Coordinate-format dump: one "i j value" line per stored entry.
void write_matrix_dump(std::ostream& os, const SparseMatrix& matrix);

} // namespace perfwall
