#pragma once

#include "perfwall/effective.hpp"
#include "perfwall/fem.hpp"
#include "perfwall/geometry.hpp"

#include <functional>
#include <vector>

namespace perfwall {

/// Solve the Helmholtz problem on the full eps-domain (bulk, channels, strip)
/// with homogeneous Neumann conditions everywhere.
[[nodiscard]] Field solve_epsilon_problem(const GridPtr& grid_eps, const GeometryParams& p, const Source& source,
                                          SolveLog* log = nullptr);
/// Omega0-supported source.
[[nodiscard]] Field solve_epsilon_problem(const GridPtr& grid_eps, const GeometryParams& p, const ScalarFunction& f,
                                          SolveLog* log = nullptr);

/// Strip average v_eps(x1) = (1/(eps V)) \int_{L eps}^{(L+V) eps} u_eps(x1, .) at every x1 grid line.
[[nodiscard]] TraceProfile extract_v_eps(const Field& u_eps, const GeometryParams& p);

/// u_eps restricted to the Omega0 nodes of `grid0` (index-level, no interpolation).
[[nodiscard]] Field restrict_to_limit(const Field& u_eps, const GridPtr& grid0);

/// (u_eps - u) / eps on the Omega0 grid of u.
[[nodiscard]] Field extract_corrector(const Field& u_eps, const Field& u, const GeometryParams& p);

/// Channel flux aggregated per period.
struct FluxDensity {
    std::vector<double> period_bounds;  ///< N + 1 entries, k*eps then a
    std::vector<double> channel_totals; ///< J_k = (1/(L eps^2)) \int_{channel k} d2 u
    std::vector<double> density;        ///< J_k / eps, constant on period k

    [[nodiscard]] double operator()(double x1) const;
    /// \int_I j psi dx1 given an antiderivative of psi.
    [[nodiscard]] double integral_against(const std::function<double(double)>& antiderivative) const;
};

[[nodiscard]] FluxDensity extract_flux(const Field& u_eps, const GeometryParams& p);

/// Half-open range of channel indices [k_begin, k_end).
struct ChannelWindow {
    std::size_t k_begin;
    std::size_t k_end;
};

/// B_eps over a window, computed twice: from the channel volume integral of
/// d2 u and from the difference of channel-top and channel-bottom integrals.
struct WindowFlux {
    ChannelWindow window;
    double volume_form;
    double boundary_form;
};

struct ChannelDiagnostics {
    double d2_l1_scaled = 0.0; ///< eps^-2 \int_C |d2 u|
    double d1_l1_scaled = 0.0; ///< eps^-1 \int_C |d1 u|
    std::vector<double> per_channel_flux;
    std::vector<double> top_avgs;    ///< mean of u on x2 = L eps over each channel
    std::vector<double> bottom_avgs; ///< mean of u on x2 = 0 over each channel
    std::vector<WindowFlux> B_eps_windows;
};

[[nodiscard]] ChannelDiagnostics channel_diagnostics(const Field& u_eps, const GeometryParams& p,
                                                     const std::vector<ChannelWindow>& windows);

/// || j_eps - (alpha/L)(mean of v_eps over the period - channel bottom mean) ||_{L1(I)}.
[[nodiscard]] double flow_rule_residual(const FluxDensity& j, const TraceProfile& v_eps,
                                        const ChannelDiagnostics& diag, const GeometryParams& p);

/// Test function on I with closed-form derivative and antiderivative.
struct TestFunction {
    std::function<double(double)> value;
    std::function<double(double)> derivative;
    std::function<double(double)> antiderivative;
};

/// {1, cos(m pi x1 / a) : m = 1..m_max}.
[[nodiscard]] std::vector<TestFunction> cosine_test_family(double a, int m_max);

/// \int j psi + V \int v' psi' - V omega^2 \int v psi - V \int f_s psi for one
/// test function; f_s is the strip source, zero when absent.
[[nodiscard]] double mass_conservation_defect(const FluxDensity& j, const TraceProfile& v_eps,
                                              const GeometryParams& p, const TestFunction& psi,
                                              const TraceProfile* strip_source = nullptr);

/// Max of |mass_conservation_defect| over a test family.
[[nodiscard]] double mass_conservation_residual(const FluxDensity& j, const TraceProfile& v_eps,
                                                const GeometryParams& p, const std::vector<TestFunction>& family,
                                                const TraceProfile* strip_source = nullptr);

} // namespace perfwall
