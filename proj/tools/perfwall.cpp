// perfwall: Helmholtz problems on a perforated wall with thin resonator channels.

#include "perfwall/errors.hpp"
#include "perfwall/fem.hpp"
#include "perfwall/geometry.hpp"
#include "perfwall/harness.hpp"
#include "perfwall/io.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>

namespace {

using namespace perfwall;

enum Exit : int { kOk = 0, kInputError = 1, kSolverError = 2, kGateFailure = 3 };

struct Options {
    std::string config;
    std::optional<std::string> out;
    std::optional<unsigned> threads;
    std::uint64_t seed = 1;
};

int exit_code(ErrorCode code)
{
    switch (code) {
    case ErrorCode::SingularMatrix:
    case ErrorCode::FactorizationFailure:
    case ErrorCode::ResonantMode:
    case ErrorCode::NoTraceLine:
    case ErrorCode::NoStripInGrid:
    case ErrorCode::NoChannelsInGrid:
    case ErrorCode::GridMismatch:
        return kSolverError;
    default:
        return kInputError;
    }
}

StudyConfig load(const Options& o)
{
    StudyConfig cfg = o.config.empty() ? StudyConfig{} : parse_config(std::filesystem::path(o.config));
    if (o.config.empty()) {
        cfg.source = SourceSpec::canonical_bump(cfg.params.a, cfg.params.b);
    }
    if (o.out) {
        cfg.outputs.dir = *o.out;
    }
    if (o.threads) {
        cfg.threads = *o.threads;
    }
    validate_config(cfg);
    return cfg;
}

void print_gates(const StudyReport& report)
{
    for (const Gate& g : report.gates) {
        std::cout << (g.passed ? "PASS " : "FAIL ") << g.name << "  [" << g.detail << "]\n";
    }
}

void print_rows(const StudyReport& report)
{
    for (const StudyRow& r : report.rows) {
        std::cout << std::setw(14) << r.label << "  " << to_string(r.status);
        if (!r.note.empty()) {
            std::cout << "  (" << r.note << ")";
        }
        std::cout << '\n';
    }
}

int finish(const StudyReport& report, const StudyConfig& cfg, bool profiles)
{
    const RunManifest m = emit_report(report, cfg.outputs.dir, cfg, {profiles || cfg.outputs.profiles});
    print_rows(report);
    print_gates(report);
    std::cout << "wrote " << m.files.size() << " files to " << cfg.outputs.dir << '\n';
    return report.gates_passed() ? kOk : kGateFailure;
}

int cmd_check(const Options& o)
{
    const StudyConfig cfg = load(o);
    StudyReport report = manufactured_check(cfg);
    const StudyReport identity = identity_check(cfg, o.seed);
    report.rows.insert(report.rows.end(), identity.rows.begin(), identity.rows.end());
    report.summary.insert(report.summary.end(), identity.summary.begin(), identity.summary.end());
    report.gates.insert(report.gates.end(), identity.gates.begin(), identity.gates.end());
    return finish(report, cfg, false);
}

int cmd_solve_eps(const Options& o)
{
    const StudyConfig cfg = load(o);
    const StudyReport report = run_epsilon_solve(cfg);
    if (cfg.outputs.grid_dump || cfg.outputs.matrix_dump) {
        const GeometryParams p = validate_params(cfg.params);
        const GridPtr g = build_grid(p, resolution_for(cfg, p.eps()));
        std::filesystem::create_directories(cfg.outputs.dir);
        if (cfg.outputs.grid_dump) {
            std::ofstream os(std::filesystem::path(cfg.outputs.dir) / "grid.txt");
            write_grid_dump(os, *g);
        }
        if (cfg.outputs.matrix_dump) {
            std::ofstream os(std::filesystem::path(cfg.outputs.dir) / "matrix.txt");
            write_matrix_dump(os, assemble_helmholtz_2d(*g, p.omega(), cfg.source.function(p.record()).f).matrix);
        }
    }
    return finish(report, cfg, true);
}

int cmd_solve_effective(const Options& o)
{
    const StudyConfig cfg = load(o);
    return finish(run_effective_solve(cfg), cfg, true);
}

int cmd_homogenize(const Options& o)
{
    const StudyConfig cfg = load(o);
    return finish(run_homogenization_study(cfg), cfg, false);
}

int cmd_sweep(const Options& o)
{
    const StudyConfig cfg = load(o);
    const StudyReport report = run_resonance_sweep(cfg);
    const int rc = finish(report, cfg, false);
    std::cout << "peak omega " << report.summary_value("omega_peak") << ", predicted "
              << report.summary_value("omega_pred") << ", growth exponent " << report.summary_value("growth_exponent")
              << '\n';
    return rc;
}

int cmd_info(const Options& o)
{
    const StudyConfig cfg = load(o);
    const GeometryParams p = validate_params(cfg.params);
    std::cout << std::setprecision(10);
    std::cout << "a = " << p.a() << ", b = " << p.b() << ", L = " << p.L() << ", V = " << p.V()
              << ", alpha = " << p.alpha() << ", eps = " << p.eps() << ", omega = " << p.omega() << '\n';
    std::cout << "channels: " << p.channel_count() << ", width " << p.channel_width() << ", top at x2 = "
              << p.channel_top() << ", strip top at x2 = " << p.strip_top() << '\n';
    std::cout << "domain area: " << p.domain_area() << '\n';
    std::cout << "resonator frequency omega_H = " << resonance_frequency(p) << '\n';

    std::cout << "Neumann eigenvalues of Omega0 near omega^2 = " << p.omega() * p.omega() << ":\n";
    const double pi2 = std::numbers::pi * std::numbers::pi;
    for (int m = 0; m <= 3; ++m) {
        for (int n = 0; n <= 3; ++n) {
            const double lambda = pi2 * (m * m / (p.a() * p.a()) + n * n / (p.b() * p.b()));
            std::cout << "  (" << m << "," << n << ") " << lambda << '\n';
        }
    }
    const EigenProximity near = neumann_proximity(p.a(), p.b(), p.omega());
    std::cout << "nearest eigenvalue " << near.eigenvalue << ", relative gap " << near.relative_gap << '\n';

    for (double eps : cfg.eps_list) {
        ParamRecord r = cfg.params;
        r.eps = eps;
        const GeometryParams pe = validate_params(r);
        const ResolutionPolicy res = resolution_for(cfg, eps);
        std::cout << "eps = " << eps << ", h = " << res.h << ": ";
        try {
            const GridPtr g = build_grid(pe, res);
            std::cout << g->unknown_count() << " unknowns, " << g->cells_x1() << " x " << g->cells_x2()
                      << " lattice cells\n";
        } catch (const Error& e) {
            std::cout << e.what() << '\n';
        }
    }
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Helmholtz problems on a perforated wall with thin resonator channels"};
    app.set_version_flag("--version", std::string(perfwall::tool_version()));
    app.require_subcommand(1);

    Options opts;
    const auto common = [&opts](CLI::App* sub, bool config_required) {
        auto* c = sub->add_option("--config", opts.config, "configuration file (key = value lines)");
        if (config_required) {
            c->required()->check(CLI::ExistingFile);
        } else {
            c->check(CLI::ExistingFile);
        }
        sub->add_option("--out", opts.out, "output directory (default ./out)");
        sub->add_option("--threads", opts.threads, "worker threads for independent rows (default 1)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--seed", opts.seed, "seed for randomized checks");
    };

    struct Command {
        const char* name;
        const char* help;
        bool config_required;
        int (*run)(const Options&);
    };
    const Command commands[] = {
        {"check", "manufactured-solution rate gates and the B_eps identity", false, cmd_check},
        {"solve-eps", "solve the eps-problem and dump v_eps and j_eps", true, cmd_solve_eps},
        {"solve-effective", "solve the effective system (u, v, w)", true, cmd_solve_effective},
        {"homogenize", "eps-sweep against the effective system", true, cmd_homogenize},
        {"sweep", "omega-sweep of the resonator response", true, cmd_sweep},
        {"info", "validated parameters, resonance and grid sizes", true, cmd_info},
    };
    int (*selected)(const Options&) = nullptr;
    for (const Command& c : commands) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        common(sub, c.config_required);
        sub->callback([&selected, run = c.run] { selected = run; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kInputError;
    }

    try {
        return selected(opts);
    } catch (const perfwall::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kSolverError;
    }
}
