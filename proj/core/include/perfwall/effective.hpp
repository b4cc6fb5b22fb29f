#pragma once

#include "perfwall/fem.hpp"
#include "perfwall/geometry.hpp"

#include <algorithm>
#include <functional>
#include <optional>

namespace perfwall {

/// Piecewise-linear function on the interval I = (0, a).
struct TraceProfile {
    TraceProfile(Interval1DGrid grid, Vector values);

    [[nodiscard]] static TraceProfile constant(Interval1DGrid grid, double value);
    [[nodiscard]] static TraceProfile interpolate(Interval1DGrid grid, const std::function<double(double)>& fn);

    /// Piecewise-linear evaluation; clamps outside [0, a].
    [[nodiscard]] double operator()(double x1) const;
    /// \int_lo^hi of the interpolant; lo and hi must be grid nodes for exactness.
    [[nodiscard]] double integral(double lo, double hi) const;

    Interval1DGrid grid;
    Vector values;
};

/// Running record of solver residuals, threaded through the solve routines.
struct SolveLog {
    double max_residual = 0.0;
    double max_rounded_residual = 0.0;
    int solves = 0;

    void record(const SolveResult& r) noexcept
    {
        max_residual = std::max(max_residual, r.relative_residual);
        max_rounded_residual = std::max(max_rounded_residual, r.rounded_residual);
        ++solves;
    }
};

/// Right-hand side f. A source confined to Omega0 leaves the channels and the
/// strip unforced. Otherwise f also acts there and reaches the effective
/// resonator equation through its values on Gamma0.
struct Source {
    ScalarFunction f;
    bool omega0_only = true;

    /// f(x1, 0) on the nodes of `grid`, or nullopt for an Omega0-only source.
    [[nodiscard]] std::optional<TraceProfile> strip_profile(const Interval1DGrid& grid) const;
};

/// -Laplace u - omega^2 u = f on Omega0, homogeneous Neumann on its boundary.
[[nodiscard]] Field solve_trivial_limit(const GridPtr& grid0, const GeometryParams& p, const ScalarFunction& f,
                                        SolveLog* log = nullptr);

/// Nodal values on the line x2 = 0. Throws NoTraceLine if the grid has no such line.
[[nodiscard]] TraceProfile trace_on_gamma0(const Field& u);

/// (-d^2/dx1^2 + alpha/(LV) - omega^2) v = alpha/(LV) u_trace + f_s with Neumann ends,
/// f_s the strip source (zero when absent).
[[nodiscard]] TraceProfile solve_v(const TraceProfile& u_trace, const GeometryParams& p, SolveLog* log = nullptr,
                                   const TraceProfile* strip_source = nullptr);

/// Gamma0 load of the corrector from the weak form:
/// -V \int (v' phi' - omega^2 v phi - f_s phi), one entry per interval node.
[[nodiscard]] Vector corrector_load_weak(const TraceProfile& v, const GeometryParams& p,
                                         const TraceProfile* strip_source = nullptr);
/// The same load written through the flow rule: (alpha/L) \int (v - u) phi.
[[nodiscard]] Vector corrector_load_flux(const TraceProfile& v, const TraceProfile& u_trace, const GeometryParams& p);

/// Homogeneous Helmholtz problem on Omega0 with the weak-form Gamma0 load.
[[nodiscard]] Field solve_corrector_w(const TraceProfile& v, const GeometryParams& p, const GridPtr& grid0,
                                      SolveLog* log = nullptr, const TraceProfile* strip_source = nullptr);
/// Same problem driven by an explicit Gamma0 load vector (one entry per trace node).
[[nodiscard]] Field solve_corrector_with_load(const Vector& gamma0_load, const GeometryParams& p, const GridPtr& grid0,
                                              SolveLog* log = nullptr);

struct EffectiveSolution {
    Field u;
    TraceProfile v;
    Field w;
    double omega;
};

/// u, then v from the trace of u, then w with the Gamma0 load in flux form.
[[nodiscard]] EffectiveSolution solve_effective(const GridPtr& grid0, const GeometryParams& p, const Source& source,
                                                SolveLog* log = nullptr);
[[nodiscard]] EffectiveSolution solve_effective(const GridPtr& grid0, const GeometryParams& p, const ScalarFunction& f,
                                                SolveLog* log = nullptr);

/// sqrt(alpha / (L V)).
[[nodiscard]] double resonance_frequency(const GeometryParams& p);

/// v0/u0 = (alpha/(LV)) / (k^2 + alpha/(LV) - omega^2). Throws ResonantMode
/// when the denominator is below 1e-12 * alpha/(LV) in magnitude.
[[nodiscard]] double mode_amplitude_ratio(double k, const GeometryParams& p);

/// Warns when omega^2 is within relative 1e-3 of (m pi / a)^2 + alpha/(LV), m <= 20.
bool guard_resonator_eigenvalue(const GeometryParams& p);

} // namespace perfwall
