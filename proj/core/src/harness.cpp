#include "perfwall/harness.hpp"

#include "perfwall/errors.hpp"
#include "perfwall/multiscale.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

namespace perfwall {

namespace {

using Clock = std::chrono::steady_clock;

constexpr double kPi = std::numbers::pi;

std::string sci(double v)
{
    std::ostringstream os;
    os.precision(4);
    os << std::scientific << v;
    return os.str();
}

double elapsed_ms(Clock::time_point t0)
{
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// Runs fn(i) for i in [0, n) on up to `threads` workers. Results land at their
// index, so the report order never depends on completion order. The first
// exception by index is rethrown after all workers finish.
std::vector<StudyRow> run_rows(std::size_t n, unsigned threads, const std::function<StudyRow(std::size_t)>& fn)
{
    std::vector<StudyRow> rows(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                rows[i] = fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const unsigned count = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
    if (count == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < count; ++t) {
            pool.emplace_back(worker);
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    return rows;
}

StudyRow failed_row(std::string label, const Error& e)
{
    StudyRow row;
    row.label = std::move(label);
    row.status = RowStatus::Failed;
    row.note = e.what();
    return row;
}

void mark_residual(StudyRow& row, const SolveLog& log)
{
    row.residual = log.max_residual;
    row.set_extra("rounded_residual", log.max_rounded_residual);
    if (!(log.max_residual <= kResidualTolerance) && row.status == RowStatus::Ok) {
        row.status = RowStatus::Invalid;
        row.note = "solver residual " + sci(log.max_residual) + " above " + sci(kResidualTolerance);
    }
}

Gate make_gate(std::string name, bool passed, std::string detail)
{
    return Gate{std::move(name), passed, std::move(detail)};
}

bool usable(const StudyRow& r) { return r.status != RowStatus::Failed; }

std::vector<const StudyRow*> usable_rows(const StudyReport& report)
{
    std::vector<const StudyRow*> out;
    for (const StudyRow& r : report.rows) {
        if (usable(r)) {
            out.push_back(&r);
        }
    }
    return out;
}

Gate strictly_decreasing(const std::vector<const StudyRow*>& rows, const std::string& name,
                         const std::function<double(const StudyRow&)>& get)
{
    std::ostringstream detail;
    bool ok = rows.size() >= 2;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double v = get(*rows[i]);
        detail << (i ? " > " : "") << sci(v);
        if (i > 0 && !(v < get(*rows[i - 1]))) {
            ok = false;
        }
    }
    return make_gate(name + " strictly decreasing", ok, detail.str());
}

Gate residual_gate(const StudyReport& report)
{
    double worst = 0.0;
    bool ok = true;
    for (const StudyRow& r : report.rows) {
        if (usable(r)) {
            worst = std::max(worst, r.residual);
            ok = ok && r.residual <= kResidualTolerance;
        }
    }
    return make_gate("solver residual <= 1e-10", ok, "max " + sci(worst));
}

std::vector<ChannelWindow> default_windows(std::size_t n)
{
    std::vector<ChannelWindow> w{{0, n}};
    if (n >= 2) {
        w.push_back({0, n / 2});
        w.push_back({n / 2, n});
    }
    return w;
}

NamedProfile profile_of(std::string name, const TraceProfile& t)
{
    const auto nodes = t.grid.nodes();
    return {std::move(name), {nodes.begin(), nodes.end()}, {t.values.data(), t.values.data() + t.values.size()}};
}

NamedProfile profile_of(std::string name, const FluxDensity& j)
{
    NamedProfile out{std::move(name), {}, {}};
    for (std::size_t k = 0; k < j.density.size(); ++k) {
        out.x1.push_back(0.5 * (j.period_bounds[k] + j.period_bounds[k + 1]));
        out.values.push_back(j.density[k]);
    }
    return out;
}

double max_abs(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

std::string eps_tag(double eps)
{
    std::ostringstream os;
    os << "eps_" << eps;
    return os.str();
}

// Dominant cosine mode m (0..20) of a profile on (0, a), by L2 projection.
int dominant_mode(const TraceProfile& t, double a)
{
    int best = 0;
    double best_amp = -1.0;
    const auto nodes = t.grid.nodes();
    for (int m = 0; m <= 20; ++m) {
        double proj = 0.0;
        for (std::size_t e = 0; e < t.grid.element_count(); ++e) {
            const double h = t.grid.element_size(e);
            for (double s : {0.5 - 0.5 / std::numbers::sqrt3, 0.5 + 0.5 / std::numbers::sqrt3}) {
                const double x = nodes[e] + s * h;
                proj += 0.5 * h * t(x) * std::cos(m * kPi * x / a);
            }
        }
        const double amp = std::abs(proj) / (m == 0 ? a : 0.5 * a);
        if (amp > best_amp * (1 + 1e-12)) {
            best_amp = amp;
            best = m;
        }
    }
    return best;
}

// Vertex of the parabola through three points with distinct abscissae.
double parabola_vertex(const std::array<std::pair<double, double>, 3>& pts)
{
    const auto [x0, y0] = pts[0];
    const auto [x1, y1] = pts[1];
    const auto [x2, y2] = pts[2];
    const double d01 = (y1 - y0) / (x1 - x0);
    const double d12 = (y2 - y1) / (x2 - x1);
    const double c2 = (d12 - d01) / (x2 - x0);
    if (c2 == 0.0) {
        return x1;
    }
    const double c1 = d01 - c2 * (x0 + x1);
    return -c1 / (2 * c2);
}

// Least-squares slope of y against x.
double fit_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double den = n * sxx - sx * sx;
    return den == 0.0 ? kBlank : (n * sxy - sx * sy) / den;
}

GeometryParams params_at(const StudyConfig& cfg, double eps, double omega)
{
    ParamRecord r = cfg.params;
    r.eps = eps;
    r.omega = omega;
    return validate_params(r);
}

// --- manufactured check -------------------------------------------------------

struct Levels {
    std::vector<double> h;
    std::vector<double> e_l2;
    std::vector<double> e_h1;
};

double min_rate(const std::vector<double>& e, const std::vector<double>& h)
{
    if (e.size() < 2) {
        return kBlank;
    }
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < e.size(); ++i) {
        const double r = observed_rate(e[i], e[i + 1], h[i], h[i + 1]);
        if (std::isnan(r)) {
            return kBlank;
        }
        worst = std::min(worst, r);
    }
    return worst;
}

void attach_rates(std::vector<StudyRow>& rows, std::size_t first, const Levels& lv)
{
    for (std::size_t i = 0; i + 1 < lv.h.size(); ++i) {
        StudyRow& r = rows[first + i];
        r.set_extra("rate_L2", observed_rate(lv.e_l2[i], lv.e_l2[i + 1], lv.h[i], lv.h[i + 1]));
        if (!lv.e_h1.empty()) {
            r.set_extra("rate_H1", observed_rate(lv.e_h1[i], lv.e_h1[i + 1], lv.h[i], lv.h[i + 1]));
        }
    }
}

} // namespace

// ---------------------------------------------------------------------------

SourceSpec SourceSpec::cosine_mode(int m, int n)
{
    SourceSpec s;
    s.kind = Kind::CosineMode;
    s.m = m;
    s.n = n;
    return s;
}

SourceSpec SourceSpec::gaussian_bump(double center_x1, double center_x2, double width)
{
    SourceSpec s;
    s.kind = Kind::GaussianBump;
    s.center_x1 = center_x1;
    s.center_x2 = center_x2;
    s.width = width;
    return s;
}

SourceSpec SourceSpec::constant(double c)
{
    SourceSpec s;
    s.kind = Kind::Constant;
    s.value = c;
    return s;
}

SourceSpec SourceSpec::canonical_bump(double a, double b) { return gaussian_bump(0.5 * a, -0.5 * b, 0.25 * b); }

Source SourceSpec::function(const ParamRecord& p) const
{
    switch (kind) {
    case Kind::CosineMode: {
        const double k1 = m * kPi / p.a;
        const double k2 = n * kPi / p.b;
        return {[k1, k2](double x1, double x2) { return x2 > 0.0 ? 0.0 : std::cos(k1 * x1) * std::cos(k2 * x2); },
                true};
    }
    case Kind::GaussianBump: {
        const double c1 = center_x1, c2 = center_x2, w2 = width * width;
        return {[c1, c2, w2](double x1, double x2) {
                    if (x2 > 0.0) {
                        return 0.0;
                    }
                    const double d1 = x1 - c1, d2 = x2 - c2;
                    return std::exp(-(d1 * d1 + d2 * d2) / w2);
                },
                true};
    }
    case Kind::Constant: {
        const double c = value;
        return {[c](double, double) { return c; }, false};
    }
    }
    return {};
}

const char* to_string(SourceSpec::Kind k) noexcept
{
    switch (k) {
    case SourceSpec::Kind::CosineMode: return "cosine_mode";
    case SourceSpec::Kind::GaussianBump: return "gaussian_bump";
    case SourceSpec::Kind::Constant: return "constant";
    }
    return "?";
}

const char* to_string(SweepMode m) noexcept { return m == SweepMode::Effective ? "effective" : "epsilon"; }

const char* to_string(SweepForcing f) noexcept { return f == SweepForcing::TraceConstant ? "trace_constant" : "source"; }

const char* to_string(RowStatus s) noexcept
{
    switch (s) {
    case RowStatus::Ok: return "ok";
    case RowStatus::Invalid: return "invalid";
    case RowStatus::Failed: return "failed";
    }
    return "?";
}

const char* to_string(ReportKind k) noexcept
{
    switch (k) {
    case ReportKind::Manufactured: return "check";
    case ReportKind::Identity: return "identity";
    case ReportKind::Homogenization: return "homogenize";
    case ReportKind::Resonance: return "sweep";
    case ReportKind::EpsilonSolve: return "solve-eps";
    case ReportKind::EffectiveSolve: return "solve-effective";
    }
    return "?";
}

std::vector<double> linspace(double lo, double hi, std::size_t n)
{
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    if (n > 1) {
        out.back() = hi;
    }
    return out;
}

void validate_config(const StudyConfig& cfg)
{
    const auto invalid = [](const std::string& key, const std::string& why) {
        fail(ErrorCode::ValidationError, key + ": " + why);
    };
    try {
        (void)validate_params(cfg.params);
    } catch (const Error& e) {
        invalid("geometry", e.what());
    }
    if (cfg.eps_list.empty()) {
        invalid("study.eps_list", "list is empty");
    }
    for (double eps : cfg.eps_list) {
        try {
            (void)params_at(cfg, eps, cfg.params.omega);
        } catch (const Error& e) {
            invalid("study.eps_list", e.what());
        }
    }
    for (double omega : cfg.omega_list) {
        if (!(omega > 0.0) || !std::isfinite(omega)) {
            invalid("study.omega_list", "omega must be positive and finite, got " + sci(omega));
        }
    }
    try {
        validate_policy(cfg.resolution);
    } catch (const Error& e) {
        invalid("resolution", e.what());
    }
    if (!(cfg.h_per_eps >= 1.0) || !std::isfinite(cfg.h_per_eps)) {
        invalid("resolution.h_per_eps", "must be at least 1");
    }
    if (cfg.check_levels.size() < 2) {
        invalid("check.levels", "at least two levels are needed for a rate");
    }
    for (std::size_t i = 0; i < cfg.check_levels.size(); ++i) {
        if (!(cfg.check_levels[i] > 0.0) || (i > 0 && !(cfg.check_levels[i] < cfg.check_levels[i - 1]))) {
            invalid("check.levels", "levels must be positive and strictly decreasing");
        }
    }
    const SourceSpec& s = cfg.source;
    if (s.kind == SourceSpec::Kind::CosineMode && (s.m < 0 || s.n < 0)) {
        invalid("source.m", "mode numbers must be non-negative");
    }
    if (s.kind == SourceSpec::Kind::GaussianBump && !(s.width > 0.0)) {
        invalid("source.width", "must be positive");
    }
    if (!std::isfinite(s.value) || !std::isfinite(s.center_x1) || !std::isfinite(s.center_x2)) {
        invalid("source", "values must be finite");
    }
    if (cfg.sweep_mode == SweepMode::Epsilon && cfg.sweep_forcing == SweepForcing::TraceConstant) {
        invalid("sweep.forcing", "trace_constant forcing requires sweep.mode = effective");
    }
    if (!std::isfinite(cfg.trace_value)) {
        invalid("sweep.trace_value", "must be finite");
    }
    if (cfg.threads == 0) {
        invalid("study.threads", "must be at least 1");
    }
}

ResolutionPolicy resolution_for(const StudyConfig& cfg, double eps)
{
    ResolutionPolicy res = cfg.resolution;
    res.h = std::min(res.h, eps / cfg.h_per_eps);
    return res;
}

double StudyRow::extra(const std::string& key) const
{
    for (const auto& [k, v] : extras) {
        if (k == key) {
            return v;
        }
    }
    return kBlank;
}

void StudyRow::set_extra(const std::string& key, double value)
{
    for (auto& [k, v] : extras) {
        if (k == key) {
            v = value;
            return;
        }
    }
    extras.emplace_back(key, value);
}

bool StudyReport::gates_passed() const noexcept
{
    return std::all_of(gates.begin(), gates.end(), [](const Gate& g) { return g.passed; });
}

double StudyReport::summary_value(const std::string& key) const
{
    for (const auto& [k, v] : summary) {
        if (k == key) {
            return v;
        }
    }
    return kBlank;
}

double observed_rate(double e_i, double e_next, double s_i, double s_next)
{
    if (!(e_i > 0.0) || !(e_next > 0.0) || !(s_i > 0.0) || !(s_next > 0.0) || s_i == s_next) {
        return kBlank;
    }
    return std::log(e_i / e_next) / std::log(s_i / s_next);
}

// ---------------------------------------------------------------------------
// Manufactured solutions

StudyReport manufactured_check(const StudyConfig& cfg)
{
    validate_config(cfg);
    const ParamRecord& p = cfg.params;
    const int m = cfg.source.kind == SourceSpec::Kind::CosineMode ? cfg.source.m : 1;
    const int n = cfg.source.kind == SourceSpec::Kind::CosineMode ? cfg.source.n : 1;
    const double k1 = m * kPi / p.a;
    const double k2 = n * kPi / p.b;
    const double w2 = p.omega * p.omega;
    const double lambda = k1 * k1 + k2 * k2;

    StudyReport report;
    report.kind = ReportKind::Manufactured;
    guard_neumann_eigenvalue(p.a, p.b, p.omega);

    const auto& levels = cfg.check_levels;
    Levels two_d, one_d;
    double const_err = 0.0;
    double worst_residual = 0.0;

    // 2D Helmholtz on Omega0 with u* = cos(k1 x1) cos(k2 x2)
    const Reference exact{[=](double x1, double x2) { return std::cos(k1 * x1) * std::cos(k2 * x2); },
                          [=](double x1, double x2) {
                              return std::array<double, 2>{-k1 * std::sin(k1 * x1) * std::cos(k2 * x2),
                                                           -k2 * std::cos(k1 * x1) * std::sin(k2 * x2)};
                          }};
    const ScalarFunction f2 = [=](double x1, double x2) { return (lambda - w2) * exact.value(x1, x2); };
    const std::size_t first_2d = report.rows.size();
    for (double h : levels) {
        const auto t0 = Clock::now();
        const GridPtr g = build_rectangle_grid(p.a, p.b, h);
        const SolveResult r = solve_direct(assemble_helmholtz_2d(*g, p.omega, f2));
        const Field u(g, r.x);
        StudyRow row;
        row.label = "helmholtz_2d";
        row.omega = p.omega;
        row.set_extra("h", h);
        row.set_extra("unknowns", static_cast<double>(g->unknown_count()));
        two_d.h.push_back(h);
        two_d.e_l2.push_back(norm(u, exact, NormKind::L2));
        two_d.e_h1.push_back(norm(u, exact, NormKind::H1Semi));
        row.set_extra("error_L2", two_d.e_l2.back());
        row.set_extra("error_H1", two_d.e_h1.back());
        SolveLog log;
        log.record(r);
        mark_residual(row, log);
        worst_residual = std::max(worst_residual, r.relative_residual);
        row.wall_ms = elapsed_ms(t0);
        report.rows.push_back(std::move(row));
    }
    attach_rates(report.rows, first_2d, two_d);

    // 1D: -v'' + v = (1 + k1^2) cos(k1 x1), v* = cos(k1 x1)
    const std::size_t first_1d = report.rows.size();
    for (double h : levels) {
        const auto t0 = Clock::now();
        const auto cells = static_cast<std::size_t>(std::max(1.0, std::ceil(p.a / h - 1e-9)));
        const Interval1DGrid g = Interval1DGrid::uniform(p.a, cells);
        std::vector<double> rhs(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
            rhs[i] = (1 + k1 * k1) * std::cos(k1 * g.nodes()[i]);
        }
        const SolveResult r = solve_direct(assemble_1d_v(g, 1.0, rhs));
        StudyRow row;
        row.label = "v_equation_1d";
        row.set_extra("h", h);
        row.set_extra("unknowns", static_cast<double>(g.size()));
        one_d.h.push_back(h);
        one_d.e_l2.push_back(norm_1d(g, {r.x.data(), static_cast<std::size_t>(r.x.size())},
                                     [=](double x) { return std::cos(k1 * x); }, NormKind::L2));
        row.set_extra("error_L2", one_d.e_l2.back());
        SolveLog log;
        log.record(r);
        mark_residual(row, log);
        worst_residual = std::max(worst_residual, r.relative_residual);
        row.wall_ms = elapsed_ms(t0);
        report.rows.push_back(std::move(row));
    }
    attach_rates(report.rows, first_1d, one_d);

    // Constant source: u = -1/omega^2 is in the discrete space.
    for (double h : levels) {
        const auto t0 = Clock::now();
        const GridPtr g = build_rectangle_grid(p.a, p.b, h);
        const SolveResult r = solve_direct(assemble_helmholtz_2d(*g, p.omega, [](double, double) { return 1.0; }));
        const double err = max_abs(r.x.array() + 1.0 / w2);
        const_err = std::max(const_err, err);
        StudyRow row;
        row.label = "constant_fixpoint";
        row.omega = p.omega;
        row.set_extra("h", h);
        row.set_extra("error_max", err);
        SolveLog log;
        log.record(r);
        mark_residual(row, log);
        worst_residual = std::max(worst_residual, r.relative_residual);
        row.wall_ms = elapsed_ms(t0);
        report.rows.push_back(std::move(row));
    }

    const double r2_l2 = min_rate(two_d.e_l2, two_d.h);
    const double r2_h1 = min_rate(two_d.e_h1, two_d.h);
    const double r1_l2 = min_rate(one_d.e_l2, one_d.h);
    report.summary = {{"rate_L2_2d", r2_l2},
                      {"rate_H1_2d", r2_h1},
                      {"rate_L2_1d", r1_l2},
                      {"constant_error_max", const_err},
                      {"max_residual", worst_residual}};
    report.gates.push_back(make_gate("2D L2 rate >= 1.8", r2_l2 >= 1.8, sci(r2_l2)));
    report.gates.push_back(make_gate("2D H1-semi rate >= 0.9", r2_h1 >= 0.9, sci(r2_h1)));
    report.gates.push_back(make_gate("1D L2 rate >= 1.8", r1_l2 >= 1.8, sci(r1_l2)));
    report.gates.push_back(make_gate("constant source exact to 1e-10", const_err <= 1e-10, sci(const_err)));
    report.gates.push_back(residual_gate(report));
    return report;
}

StudyReport identity_check(const StudyConfig& cfg, std::uint64_t seed, std::size_t fields)
{
    validate_config(cfg);
    StudyReport report;
    report.kind = ReportKind::Identity;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    double worst = 0.0;
    for (double eps : cfg.eps_list) {
        const auto t0 = Clock::now();
        const GeometryParams p = params_at(cfg, eps, cfg.params.omega);
        const GridPtr g = build_grid(p, resolution_for(cfg, eps));
        const std::vector<ChannelWindow> windows = default_windows(p.channel_count());
        double gap = 0.0;
        double scale = 0.0;
        for (std::size_t k = 0; k < fields; ++k) {
            Vector values(static_cast<Eigen::Index>(g->unknown_count()));
            for (Eigen::Index i = 0; i < values.size(); ++i) {
                values[i] = uniform(rng);
            }
            const ChannelDiagnostics diag = channel_diagnostics(Field(g, std::move(values)), p, windows);
            for (const WindowFlux& wf : diag.B_eps_windows) {
                gap = std::max(gap, std::abs(wf.volume_form - wf.boundary_form));
                scale = std::max(scale, std::abs(wf.volume_form));
            }
        }
        worst = std::max(worst, gap);
        StudyRow row;
        row.label = eps_tag(eps);
        row.eps = eps;
        row.set_extra("fields", static_cast<double>(fields));
        row.set_extra("B_eps_gap", gap);
        row.set_extra("B_eps_scale", scale);
        row.wall_ms = elapsed_ms(t0);
        report.rows.push_back(std::move(row));
    }
    report.summary = {{"B_eps_gap_max", worst}, {"seed", static_cast<double>(seed)}};
    report.gates.push_back(make_gate("B_eps volume and boundary forms agree to 1e-10", worst <= 1e-10, sci(worst)));
    return report;
}

// ---------------------------------------------------------------------------
// eps-sweep

namespace {

StudyRow homogenization_row(const StudyConfig& cfg, double eps, std::vector<NamedProfile>* profiles)
{
    const auto t0 = Clock::now();
    const GeometryParams p = params_at(cfg, eps, cfg.params.omega);
    const ResolutionPolicy res = resolution_for(cfg, eps);
    const Source src = cfg.source.function(p.record());

    StudyRow row;
    row.label = eps_tag(eps);
    row.eps = eps;
    row.omega = p.omega();
    try {
        const GridPtr ge = build_grid(p, res);
        const GridPtr g0 = build_limit_grid(p, res);
        SolveLog log;
        const Field ue = solve_epsilon_problem(ge, p, src, &log);
        const EffectiveSolution eff = solve_effective(g0, p, src, &log);

        const Field u_restricted = restrict_to_limit(ue, g0);
        row.E_u_L2 = norm(u_restricted, eff.u, NormKind::L2);
        const TraceProfile ve = extract_v_eps(ue, p);
        row.E_v_L2 = norm_1d(ve.grid, {ve.values.data(), static_cast<std::size_t>(ve.values.size())},
                             [&](double x) { return eff.v(x); }, NormKind::L2);
        const Field we = extract_corrector(ue, eff.u, p);
        row.E_w_L1 = norm(we, eff.w, NormKind::L1);

        const FluxDensity j = extract_flux(ue, p);
        const ChannelDiagnostics diag = channel_diagnostics(ue, p, default_windows(p.channel_count()));
        const std::optional<TraceProfile> strip = src.strip_profile(ve.grid);
        row.R_fr_L1 = flow_rule_residual(j, ve, diag, p);
        row.R_mc = mass_conservation_residual(j, ve, p, cosine_test_family(p.a(), 4), strip ? &*strip : nullptr);
        row.d2_l1 = diag.d2_l1_scaled;
        row.d1_l1 = diag.d1_l1_scaled;

        double b_gap = 0.0;
        for (const WindowFlux& wf : diag.B_eps_windows) {
            b_gap = std::max(b_gap, std::abs(wf.volume_form - wf.boundary_form));
        }
        row.set_extra("h", res.h);
        row.set_extra("unknowns_eps", static_cast<double>(ge->unknown_count()));
        row.set_extra("unknowns_limit", static_cast<double>(g0->unknown_count()));
        row.set_extra("E_u_rel", row.E_u_L2 / norm(eff.u, NormKind::L2));
        row.set_extra("B_eps_gap", b_gap);
        row.set_extra("u_L2", norm(eff.u, NormKind::L2));
        row.set_extra("v_L2", norm_1d(eff.v.grid, {eff.v.values.data(), static_cast<std::size_t>(eff.v.values.size())},
                                      [](double) { return 0.0; }, NormKind::L2));
        row.set_extra("w_L1", norm(eff.w, NormKind::L1));
        if (cfg.source.kind == SourceSpec::Kind::Constant) {
            const double fix = -cfg.source.value / (p.omega() * p.omega());
            row.set_extra("u_eps_fixpoint_dev", max_abs(ue.values.array() - fix));
            row.set_extra("v_dev_max", max_abs(ve.values - eff.v.values));
            row.set_extra("w_eps_max", max_abs(we.values));
            row.set_extra("w_max", max_abs(eff.w.values));
            double j_max = 0.0;
            for (double d : j.density) {
                j_max = std::max(j_max, std::abs(d));
            }
            row.set_extra("j_max", j_max);
        }
        mark_residual(row, log);
        row.set_extra("solves", log.solves);
        if (profiles != nullptr) {
            profiles->push_back(profile_of("v_" + row.label, eff.v));
            profiles->push_back(profile_of("v_eps_" + row.label, ve));
            profiles->push_back(profile_of("j_eps_" + row.label, j));
        }
    } catch (const Error& e) {
        if (e.code() != ErrorCode::SingularMatrix) {
            throw;
        }
        StudyRow failed = failed_row(row.label, e);
        failed.eps = eps;
        failed.omega = p.omega();
        return failed;
    }
    row.wall_ms = elapsed_ms(t0);
    return row;
}

} // namespace

StudyReport run_homogenization_study(const StudyConfig& cfg)
{
    validate_config(cfg);
    StudyReport report;
    report.kind = ReportKind::Homogenization;

    const StudyReport check = manufactured_check(cfg);
    report.gates.push_back(make_gate("manufactured rates", check.gates_passed(),
                                     "L2 2d " + sci(check.summary_value("rate_L2_2d")) + ", H1 2d " +
                                         sci(check.summary_value("rate_H1_2d")) + ", L2 1d " +
                                         sci(check.summary_value("rate_L2_1d"))));
    if (!check.gates_passed()) {
        return report;
    }

    std::vector<std::vector<NamedProfile>> profiles(cfg.eps_list.size());
    report.rows = run_rows(cfg.eps_list.size(), cfg.threads, [&](std::size_t i) {
        return homogenization_row(cfg, cfg.eps_list[i], cfg.outputs.profiles ? &profiles[i] : nullptr);
    });
    for (auto& p : profiles) {
        std::move(p.begin(), p.end(), std::back_inserter(report.profiles));
    }

    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        if (usable(report.rows[i])) {
            order.push_back(i);
        }
    }
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        StudyRow& r = report.rows[order[i]];
        const StudyRow& s = report.rows[order[i + 1]];
        r.rate_u = observed_rate(r.E_u_L2, s.E_u_L2, r.eps, s.eps);
        r.set_extra("rate_v", observed_rate(r.E_v_L2, s.E_v_L2, r.eps, s.eps));
        r.set_extra("rate_w", observed_rate(r.E_w_L1, s.E_w_L1, r.eps, s.eps));
        r.set_extra("E_u_ratio", r.E_u_L2 / s.E_u_L2);
    }
    const std::vector<const StudyRow*> rows = usable_rows(report);

    report.gates.push_back(residual_gate(report));
    const bool all_rows = rows.size() == report.rows.size();
    report.gates.push_back(make_gate("no failed rows", all_rows,
                                     std::to_string(report.rows.size() - rows.size()) + " failed"));

    if (cfg.source.kind == SourceSpec::Kind::Constant) {
        double worst = 0.0;
        for (const StudyRow* r : rows) {
            for (const char* key : {"u_eps_fixpoint_dev", "v_dev_max", "w_eps_max", "w_max", "j_max"}) {
                worst = std::max(worst, r->extra(key));
            }
            worst = std::max({worst, r->E_u_L2, r->E_v_L2, r->E_w_L1});
        }
        report.summary.emplace_back("fixpoint_deviation_max", worst);
        report.gates.push_back(make_gate("constant fixpoint to 1e-9", !rows.empty() && worst <= 1e-9, sci(worst)));
        return report;
    }

    // O(eps) band on E_u, stated as a rate: ratio in [1.4, 2.8] per halving.
    const double lo = std::log2(1.4), hi = std::log2(2.8);
    bool band = rows.size() >= 2;
    std::ostringstream detail;
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
        const double rate = rows[i]->rate_u;
        band = band && rate >= lo && rate <= hi;
        detail << (i ? ", " : "") << "ratio " << sci(rows[i]->extra("E_u_ratio")) << " rate " << sci(rate);
    }
    report.gates.push_back(make_gate("E_u ratio per halving in [1.4, 2.8]", band, detail.str()));
    report.gates.push_back(strictly_decreasing(rows, "R_fr", [](const StudyRow& r) { return r.R_fr_L1; }));
    report.gates.push_back(strictly_decreasing(rows, "R_mc", [](const StudyRow& r) { return r.R_mc; }));
    report.gates.push_back(strictly_decreasing(rows, "E_w", [](const StudyRow& r) { return r.E_w_L1; }));
    report.gates.push_back(strictly_decreasing(rows, "d1_l1", [](const StudyRow& r) { return r.d1_l1; }));

    double d2_min = std::numeric_limits<double>::infinity(), d2_max = 0.0;
    for (const StudyRow* r : rows) {
        d2_min = std::min(d2_min, r->d2_l1);
        d2_max = std::max(d2_max, r->d2_l1);
    }
    report.gates.push_back(make_gate("d2_l1 within a factor 3", !rows.empty() && d2_max <= 3.0 * d2_min,
                                     sci(d2_min) + " .. " + sci(d2_max)));
    report.summary.emplace_back("d2_band_ratio", rows.empty() ? kBlank : d2_max / d2_min);
    return report;
}

// ---------------------------------------------------------------------------
// omega-sweep

StudyReport run_resonance_sweep(const StudyConfig& cfg)
{
    validate_config(cfg);
    StudyReport report;
    report.kind = ReportKind::Resonance;

    std::vector<double> omegas = cfg.omega_list.empty() ? linspace(0.7, 1.3, 41) : cfg.omega_list;
    const double eps = cfg.params.eps;
    const GeometryParams base = validate_params(cfg.params);
    const ResolutionPolicy res = resolution_for(cfg, eps);
    const GridPtr g0 = build_limit_grid(base, res);
    const GridPtr ge = cfg.sweep_mode == SweepMode::Epsilon ? build_grid(base, res) : nullptr;
    const Source src = cfg.source.function(base.record());
    const auto x1 = g0->x1_lines();
    const Interval1DGrid trace_grid(std::vector<double>(x1.begin(), x1.end()));
    const auto zero = [](double) { return 0.0; };

    report.rows = run_rows(omegas.size(), cfg.threads, [&](std::size_t i) {
        const auto t0 = Clock::now();
        const GeometryParams p = base.with_omega(omegas[i]);
        StudyRow row;
        row.label = "omega_" + std::to_string(i);
        row.omega = p.omega();
        if (cfg.sweep_mode == SweepMode::Epsilon) {
            row.eps = eps;
        }
        try {
            SolveLog log;
            TraceProfile v = TraceProfile::constant(trace_grid, 0.0);
            std::optional<Field> w;
            int mode = 0;
            if (cfg.sweep_mode == SweepMode::Effective && cfg.sweep_forcing == SweepForcing::TraceConstant) {
                row.set_extra("amplitude_ratio", mode_amplitude_ratio(0.0, p));
                v = solve_v(TraceProfile::constant(trace_grid, cfg.trace_value), p, &log);
                w = solve_corrector_w(v, p, g0, &log);
            } else if (cfg.sweep_mode == SweepMode::Effective) {
                EffectiveSolution eff = solve_effective(g0, p, src, &log);
                mode = dominant_mode(trace_on_gamma0(eff.u), p.a());
                row.set_extra("amplitude_ratio", mode_amplitude_ratio(mode * kPi / p.a(), p));
                v = std::move(eff.v);
                w = std::move(eff.w);
            } else {
                const Field ue = solve_epsilon_problem(ge, p, src, &log);
                const Field u = solve_trivial_limit(g0, p, src.f, &log);
                mode = dominant_mode(trace_on_gamma0(u), p.a());
                v = extract_v_eps(ue, p);
                w = extract_corrector(ue, u, p);
            }
            row.set_extra("mode", mode);
            row.set_extra("v_L2", norm_1d(v.grid, {v.values.data(), static_cast<std::size_t>(v.values.size())}, zero,
                                          NormKind::L2));
            row.set_extra("w_L1", norm(*w, NormKind::L1));
            mark_residual(row, log);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::SingularMatrix && e.code() != ErrorCode::ResonantMode) {
                throw;
            }
            StudyRow failed = failed_row(row.label, e);
            failed.omega = row.omega;
            failed.eps = row.eps;
            return failed;
        }
        row.wall_ms = elapsed_ms(t0);
        return row;
    });

    std::vector<const StudyRow*> rows = usable_rows(report);
    report.gates.push_back(residual_gate(report));
    if (rows.size() < 3) {
        report.gates.push_back(make_gate("peak fit", false, "fewer than three usable samples"));
        return report;
    }

    std::vector<const StudyRow*> top = rows;
    std::partial_sort(top.begin(), top.begin() + 3, top.end(),
                      [](const StudyRow* x, const StudyRow* y) { return x->extra("v_L2") > y->extra("v_L2"); });
    std::array<std::pair<double, double>, 3> pts;
    for (int k = 0; k < 3; ++k) {
        pts[k] = {top[k]->omega, top[k]->extra("v_L2")};
    }
    std::sort(pts.begin(), pts.end());
    const double omega_peak = parabola_vertex(pts);

    std::sort(omegas.begin(), omegas.end());
    double spacing = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < omegas.size(); ++i) {
        spacing = std::min(spacing, omegas[i + 1] - omegas[i]);
    }
    const int mode = static_cast<int>(top[0]->extra("mode"));
    const double k = mode * kPi / base.a();
    const double omega_pred = std::sqrt(k * k + base.resonator_coefficient());

    std::vector<double> log_delta, log_amp;
    for (const StudyRow* r : rows) {
        const double delta = std::abs(r->omega * r->omega - omega_pred * omega_pred);
        if (delta > 0.0 && r->extra("v_L2") > 0.0) {
            log_delta.push_back(std::log(delta));
            log_amp.push_back(std::log(r->extra("v_L2")));
        }
    }
    const double exponent = fit_slope(log_delta, log_amp);

    report.summary = {{"omega_peak", omega_peak},
                      {"omega_pred", omega_pred},
                      {"omega_H", resonance_frequency(base)},
                      {"mode", mode},
                      {"omega_spacing", spacing},
                      {"growth_exponent", exponent},
                      {"failed_rows", static_cast<double>(report.rows.size() - rows.size())}};
    report.gates.push_back(make_gate("peak within one omega spacing of prediction",
                                     std::abs(omega_peak - omega_pred) <= spacing,
                                     "peak " + sci(omega_peak) + ", predicted " + sci(omega_pred) + ", spacing " +
                                         sci(spacing)));
    report.gates.push_back(make_gate("growth exponent -1 +- 0.1", std::abs(exponent + 1.0) <= 0.1, sci(exponent)));
    return report;
}

// ---------------------------------------------------------------------------
// single solves

StudyReport run_epsilon_solve(const StudyConfig& cfg)
{
    validate_config(cfg);
    const auto t0 = Clock::now();
    const GeometryParams p = validate_params(cfg.params);
    const ResolutionPolicy res = resolution_for(cfg, p.eps());
    const Source src = cfg.source.function(p.record());
    const GridPtr ge = build_grid(p, res);

    StudyReport report;
    report.kind = ReportKind::EpsilonSolve;
    SolveLog log;
    const Field ue = solve_epsilon_problem(ge, p, src, &log);
    const TraceProfile ve = extract_v_eps(ue, p);
    const FluxDensity j = extract_flux(ue, p);
    const ChannelDiagnostics diag = channel_diagnostics(ue, p, default_windows(p.channel_count()));
    const std::optional<TraceProfile> strip = src.strip_profile(ve.grid);

    StudyRow row;
    row.label = eps_tag(p.eps());
    row.eps = p.eps();
    row.omega = p.omega();
    row.R_fr_L1 = flow_rule_residual(j, ve, diag, p);
    row.R_mc = mass_conservation_residual(j, ve, p, cosine_test_family(p.a(), 4), strip ? &*strip : nullptr);
    row.d2_l1 = diag.d2_l1_scaled;
    row.d1_l1 = diag.d1_l1_scaled;
    double b_gap = 0.0;
    for (const WindowFlux& wf : diag.B_eps_windows) {
        b_gap = std::max(b_gap, std::abs(wf.volume_form - wf.boundary_form));
    }
    row.set_extra("h", res.h);
    row.set_extra("unknowns_eps", static_cast<double>(ge->unknown_count()));
    row.set_extra("B_eps_gap", b_gap);
    row.set_extra("u_eps_L2", norm(ue, NormKind::L2));
    mark_residual(row, log);
    row.wall_ms = elapsed_ms(t0);
    report.rows.push_back(std::move(row));
    report.profiles.push_back(profile_of("v_eps", ve));
    report.profiles.push_back(profile_of("j_eps", j));
    report.gates.push_back(residual_gate(report));
    return report;
}

StudyReport run_effective_solve(const StudyConfig& cfg)
{
    validate_config(cfg);
    const auto t0 = Clock::now();
    const GeometryParams p = validate_params(cfg.params);
    const ResolutionPolicy res = resolution_for(cfg, p.eps());
    const GridPtr g0 = build_limit_grid(p, res);
    const Source src = cfg.source.function(p.record());

    StudyReport report;
    report.kind = ReportKind::EffectiveSolve;
    SolveLog log;
    const EffectiveSolution eff = solve_effective(g0, p, src, &log);
    const TraceProfile trace = trace_on_gamma0(eff.u);

    StudyRow row;
    row.label = "effective";
    row.eps = p.eps();
    row.omega = p.omega();
    row.set_extra("h", res.h);
    row.set_extra("unknowns_limit", static_cast<double>(g0->unknown_count()));
    row.set_extra("u_L2", norm(eff.u, NormKind::L2));
    row.set_extra("v_L2", norm_1d(eff.v.grid, {eff.v.values.data(), static_cast<std::size_t>(eff.v.values.size())},
                                  [](double) { return 0.0; }, NormKind::L2));
    row.set_extra("w_L1", norm(eff.w, NormKind::L1));
    row.set_extra("omega_H", resonance_frequency(p));
    mark_residual(row, log);
    row.wall_ms = elapsed_ms(t0);
    report.rows.push_back(std::move(row));
    report.profiles.push_back(profile_of("u_trace", trace));
    report.profiles.push_back(profile_of("v", eff.v));
    report.profiles.push_back(profile_of("w_trace", trace_on_gamma0(eff.w)));
    report.gates.push_back(residual_gate(report));
    return report;
}

} // namespace perfwall
