#pragma once

#include "perfwall/effective.hpp"
#include "perfwall/fem.hpp"
#include "perfwall/geometry.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace perfwall {

inline constexpr double kBlank = std::numeric_limits<double>::quiet_NaN();

/// Source families used by the studies.
struct SourceSpec {
    enum class Kind { CosineMode, GaussianBump, Constant };

    Kind kind = Kind::GaussianBump;
    int m = 1;               // cosine mode numbers
    int n = 1;
    double center_x1 = 0.5;  // gaussian bump
    double center_x2 = -0.5;
    double width = 0.25;
    double value = 1.0;      // constant

    [[nodiscard]] static SourceSpec cosine_mode(int m, int n);
    [[nodiscard]] static SourceSpec gaussian_bump(double center_x1, double center_x2, double width);
    [[nodiscard]] static SourceSpec constant(double c);
    /// Bump centred in Omega0 with width b/4.
    [[nodiscard]] static SourceSpec canonical_bump(double a, double b);

    /// cos(m pi x1/a) cos(n pi x2/b) and exp(-r^2/width^2) vanish above x2 = 0;
    /// the constant acts on the whole domain.
    [[nodiscard]] Source function(const ParamRecord& p) const;

    bool operator==(const SourceSpec&) const = default;
};

[[nodiscard]] const char* to_string(SourceSpec::Kind k) noexcept;

enum class SweepMode { Effective, Epsilon };
enum class SweepForcing { TraceConstant, Source };

[[nodiscard]] const char* to_string(SweepMode m) noexcept;
[[nodiscard]] const char* to_string(SweepForcing f) noexcept;

struct OutputOptions {
    std::string dir = "out";
    bool profiles = false;
    bool grid_dump = false;
    bool matrix_dump = false;

    bool operator==(const OutputOptions&) const = default;
};

struct StudyConfig {
    ParamRecord params;
    std::vector<double> eps_list{0.25, 0.125, 0.0625};
    std::vector<double> omega_list; ///< empty: 41 samples on [0.7, 1.3]
    SourceSpec source;
    ResolutionPolicy resolution;
    double h_per_eps = 8.0; ///< bulk h is min(resolution.h, eps / h_per_eps)
    std::vector<double> check_levels{1.0 / 8, 1.0 / 16, 1.0 / 32};
    SweepMode sweep_mode = SweepMode::Effective;
    SweepForcing sweep_forcing = SweepForcing::TraceConstant;
    double trace_value = 1.0;
    OutputOptions outputs;
    unsigned threads = 1;

    bool operator==(const StudyConfig&) const = default;
};

/// n equally spaced values on [lo, hi], endpoints included.
[[nodiscard]] std::vector<double> linspace(double lo, double hi, std::size_t n);

/// Checks every field, including each eps_list entry against the geometry.
/// Throws ValidationError naming the offending key.
void validate_config(const StudyConfig& cfg);

/// Resolution used for one eps value.
[[nodiscard]] ResolutionPolicy resolution_for(const StudyConfig& cfg, double eps);

enum class RowStatus { Ok, Invalid, Failed };

[[nodiscard]] const char* to_string(RowStatus s) noexcept;

struct StudyRow {
    std::string label;
    double eps = kBlank;
    double omega = kBlank;
    double E_u_L2 = kBlank;
    double E_v_L2 = kBlank;
    double E_w_L1 = kBlank;
    double R_fr_L1 = kBlank;
    double R_mc = kBlank;
    double rate_u = kBlank;
    double d2_l1 = kBlank;
    double d1_l1 = kBlank;
    double residual = kBlank;
    double wall_ms = kBlank;
    RowStatus status = RowStatus::Ok;
    std::string note;
    std::vector<std::pair<std::string, double>> extras;

    [[nodiscard]] double extra(const std::string& key) const;
    void set_extra(const std::string& key, double value);
};

struct Gate {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct NamedProfile {
    std::string name;
    std::vector<double> x1;
    std::vector<double> values;
};

enum class ReportKind { Manufactured, Identity, Homogenization, Resonance, EpsilonSolve, EffectiveSolve };

[[nodiscard]] const char* to_string(ReportKind k) noexcept;

struct StudyReport {
    ReportKind kind = ReportKind::Homogenization;
    std::vector<StudyRow> rows;
    std::vector<std::pair<std::string, double>> summary;
    std::vector<Gate> gates;
    std::vector<NamedProfile> profiles;

    [[nodiscard]] bool gates_passed() const noexcept;
    [[nodiscard]] double summary_value(const std::string& key) const;
};

/// log(e_i / e_next) / log(s_i / s_next); blank when either error is not positive.
[[nodiscard]] double observed_rate(double e_i, double e_next, double s_i, double s_next);

/// Convergence of the 2D Helmholtz discretization on Omega0 and of the 1D
/// v-equation against closed-form solutions, plus the constant fixpoint.
[[nodiscard]] StudyReport manufactured_check(const StudyConfig& cfg);

/// Volume and boundary forms of the channel flux B_eps on `fields` random
/// nodal fields per eps grid; they must agree to 1e-10.
[[nodiscard]] StudyReport identity_check(const StudyConfig& cfg, std::uint64_t seed, std::size_t fields = 100);

/// One row per eps: the eps-problem against the effective triple (u, v, w).
/// The manufactured check runs first and must pass.
[[nodiscard]] StudyReport run_homogenization_study(const StudyConfig& cfg);

/// Amplitudes of v and w versus omega, with the peak located by a parabola
/// through the three largest samples.
[[nodiscard]] StudyReport run_resonance_sweep(const StudyConfig& cfg);

/// Single eps-problem at params.eps with flux and strip-average profiles.
[[nodiscard]] StudyReport run_epsilon_solve(const StudyConfig& cfg);

/// Effective triple at params.eps resolution with profiles of v and the trace of u.
[[nodiscard]] StudyReport run_effective_solve(const StudyConfig& cfg);

} // namespace perfwall
