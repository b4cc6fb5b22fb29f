#include "perfwall/io.hpp"

#include "perfwall/errors.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#ifndef PERFWALL_VERSION
#define PERFWALL_VERSION "0.0.0"
#endif

namespace perfwall {

namespace {

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

[[noreturn]] void parse_error(int line, const std::string& msg)
{
    fail(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + msg);
}

double parse_double(std::string_view text, int line)
{
    text = trim(text);
    if (!text.empty() && text.front() == '+') {
        text.remove_prefix(1);
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
        parse_error(line, "expected a number, got '" + std::string(text) + "'");
    }
    return v;
}

long long parse_integer(std::string_view text, int line)
{
    const double v = parse_double(text, line);
    if (v != std::floor(v) || std::abs(v) > 9.0e15) {
        parse_error(line, "expected an integer, got '" + std::string(trim(text)) + "'");
    }
    return static_cast<long long>(v);
}

std::vector<double> parse_list(std::string_view text, int line)
{
    std::vector<double> out;
    text = trim(text);
    if (text.empty()) {
        return out;
    }
    while (true) {
        const auto comma = text.find(',');
        out.push_back(parse_double(text.substr(0, comma), line));
        if (comma == std::string_view::npos) {
            break;
        }
        text.remove_prefix(comma + 1);
    }
    return out;
}

bool parse_bool(std::string_view text, int line)
{
    const std::string_view t = trim(text);
    if (t == "true" || t == "yes" || t == "1" || t == "on") {
        return true;
    }
    if (t == "false" || t == "no" || t == "0" || t == "off") {
        return false;
    }
    parse_error(line, "expected true or false, got '" + std::string(t) + "'");
}

std::string format_list(const std::vector<double>& v)
{
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out += (i ? "," : "") + format_number(v[i]);
    }
    return out;
}

// Parsing state beyond StudyConfig: which keys were set where, and whether the
// bump geometry was given explicitly.
struct ParseState {
    StudyConfig cfg;
    std::map<std::string, int> seen;
    bool bump_center = false;
    bool bump_width = false;
    std::optional<std::vector<double>> omega_range;
};

using Setter = std::function<void(ParseState&, std::string_view, int)>;

const std::map<std::string, std::pair<std::string, Setter>>& key_table()
{
    // key -> (canonical key used for duplicate detection, setter)
    static const std::map<std::string, std::pair<std::string, Setter>> table = [] {
        std::map<std::string, std::pair<std::string, Setter>> t;
        const auto add = [&t](const std::string& key, Setter s) { t.emplace(key, std::pair{key, std::move(s)}); };
        const auto num = [&add](const std::string& key, double ParamRecord::*field) {
            add(key, [field](ParseState& s, std::string_view v, int line) { s.cfg.params.*field = parse_double(v, line); });
        };
        num("geometry.a", &ParamRecord::a);
        num("geometry.b", &ParamRecord::b);
        num("geometry.L", &ParamRecord::L);
        num("geometry.V", &ParamRecord::V);
        num("geometry.alpha", &ParamRecord::alpha);
        num("geometry.eps", &ParamRecord::eps);
        num("geometry.omega", &ParamRecord::omega);

        const Setter eps_list = [](ParseState& s, std::string_view v, int line) { s.cfg.eps_list = parse_list(v, line); };
        add("study.eps_list", eps_list);
        t.emplace("geometry.eps_list", std::pair{std::string("study.eps_list"), eps_list});
        add("study.omega_list",
            [](ParseState& s, std::string_view v, int line) { s.cfg.omega_list = parse_list(v, line); });
        add("study.omega_range", [](ParseState& s, std::string_view v, int line) {
            const auto r = parse_list(v, line);
            if (r.size() != 3 || r[2] < 1 || r[2] != std::floor(r[2])) {
                parse_error(line, "study.omega_range expects lo,hi,count");
            }
            s.omega_range = linspace(r[0], r[1], static_cast<std::size_t>(r[2]));
        });
        add("study.threads", [](ParseState& s, std::string_view v, int line) {
            const long long n = parse_integer(v, line);
            if (n < 1) {
                parse_error(line, "study.threads must be at least 1");
            }
            s.cfg.threads = static_cast<unsigned>(n);
        });

        add("source.kind", [](ParseState& s, std::string_view v, int line) {
            const std::string_view k = trim(v);
            if (k == "cosine_mode") {
                s.cfg.source.kind = SourceSpec::Kind::CosineMode;
            } else if (k == "gaussian_bump") {
                s.cfg.source.kind = SourceSpec::Kind::GaussianBump;
            } else if (k == "constant") {
                s.cfg.source.kind = SourceSpec::Kind::Constant;
            } else {
                parse_error(line, "source.kind must be cosine_mode, gaussian_bump or constant");
            }
        });
        add("source.m", [](ParseState& s, std::string_view v, int line) {
            s.cfg.source.m = static_cast<int>(parse_integer(v, line));
        });
        add("source.n", [](ParseState& s, std::string_view v, int line) {
            s.cfg.source.n = static_cast<int>(parse_integer(v, line));
        });
        add("source.center", [](ParseState& s, std::string_view v, int line) {
            const auto c = parse_list(v, line);
            if (c.size() != 2) {
                parse_error(line, "source.center expects x1,x2");
            }
            s.cfg.source.center_x1 = c[0];
            s.cfg.source.center_x2 = c[1];
            s.bump_center = true;
        });
        add("source.width", [](ParseState& s, std::string_view v, int line) {
            s.cfg.source.width = parse_double(v, line);
            s.bump_width = true;
        });
        add("source.value", [](ParseState& s, std::string_view v, int line) {
            s.cfg.source.value = parse_double(v, line);
        });

        const auto count = [&add](const std::string& key, int ResolutionPolicy::*field) {
            add(key, [field](ParseState& s, std::string_view v, int line) {
                s.cfg.resolution.*field = static_cast<int>(parse_integer(v, line));
            });
        };
        count("resolution.n_w", &ResolutionPolicy::n_w);
        count("resolution.n_l", &ResolutionPolicy::n_l);
        count("resolution.n_s", &ResolutionPolicy::n_s);
        add("resolution.h", [](ParseState& s, std::string_view v, int line) {
            s.cfg.resolution.h = parse_double(v, line);
        });
        add("resolution.grading", [](ParseState& s, std::string_view v, int line) {
            s.cfg.resolution.grading = parse_double(v, line);
        });
        add("resolution.max_unknowns", [](ParseState& s, std::string_view v, int line) {
            const long long n = parse_integer(v, line);
            if (n < 0) {
                parse_error(line, "resolution.max_unknowns must be non-negative");
            }
            s.cfg.resolution.max_unknowns = static_cast<std::size_t>(n);
        });
        add("resolution.h_per_eps", [](ParseState& s, std::string_view v, int line) {
            s.cfg.h_per_eps = parse_double(v, line);
        });
        add("check.levels", [](ParseState& s, std::string_view v, int line) { s.cfg.check_levels = parse_list(v, line); });

        add("sweep.mode", [](ParseState& s, std::string_view v, int line) {
            const std::string_view m = trim(v);
            if (m == "effective") {
                s.cfg.sweep_mode = SweepMode::Effective;
            } else if (m == "epsilon") {
                s.cfg.sweep_mode = SweepMode::Epsilon;
            } else {
                parse_error(line, "sweep.mode must be effective or epsilon");
            }
        });
        add("sweep.forcing", [](ParseState& s, std::string_view v, int line) {
            const std::string_view f = trim(v);
            if (f == "trace_constant") {
                s.cfg.sweep_forcing = SweepForcing::TraceConstant;
            } else if (f == "source") {
                s.cfg.sweep_forcing = SweepForcing::Source;
            } else {
                parse_error(line, "sweep.forcing must be trace_constant or source");
            }
        });
        add("sweep.trace_value", [](ParseState& s, std::string_view v, int line) {
            s.cfg.trace_value = parse_double(v, line);
        });

        add("output.dir", [](ParseState& s, std::string_view v, int) { s.cfg.outputs.dir = std::string(trim(v)); });
        add("output.profiles",
            [](ParseState& s, std::string_view v, int line) { s.cfg.outputs.profiles = parse_bool(v, line); });
        add("output.grid_dump",
            [](ParseState& s, std::string_view v, int line) { s.cfg.outputs.grid_dump = parse_bool(v, line); });
        add("output.matrix_dump",
            [](ParseState& s, std::string_view v, int line) { s.cfg.outputs.matrix_dump = parse_bool(v, line); });
        return t;
    }();
    return table;
}

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        out += c == '"' ? std::string("\"\"") : std::string(1, c);
    }
    return out + "\"";
}

std::string utc_timestamp()
{
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body,
                std::vector<std::filesystem::path>& files)
{
    std::ofstream os(path);
    if (!os) {
        fail(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
    }
    body(os);
    os.flush();
    if (!os) {
        fail(ErrorCode::IoError, "failed writing " + path.string());
    }
    files.push_back(path);
}

} // namespace

// ---------------------------------------------------------------------------

std::string format_number(double v)
{
    if (std::isnan(v)) {
        return {};
    }
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc{} ? std::string(buf, ptr) : std::string{};
}

StudyConfig parse_config(std::istream& in)
{
    ParseState st;
    const auto& table = key_table();
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string_view text = raw;
        if (const auto hash = text.find('#'); hash != std::string_view::npos) {
            text = text.substr(0, hash);
        }
        text = trim(text);
        if (text.empty()) {
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string_view::npos) {
            parse_error(line, "expected 'key = value'");
        }
        const std::string key(trim(text.substr(0, eq)));
        if (key.empty()) {
            parse_error(line, "missing key before '='");
        }
        const auto it = table.find(key);
        if (it == table.end()) {
            fail(ErrorCode::UnknownKey, "line " + std::to_string(line) + ": unknown key '" + key + "'");
        }
        const std::string& canonical = it->second.first;
        if (const auto prev = st.seen.find(canonical); prev != st.seen.end()) {
            parse_error(line, "duplicate key '" + key + "' (first set on line " + std::to_string(prev->second) +
                                  ", again on line " + std::to_string(line) + ")");
        }
        st.seen.emplace(canonical, line);
        it->second.second(st, text.substr(eq + 1), line);
    }
    if (st.omega_range) {
        if (st.seen.count("study.omega_list") != 0) {
            parse_error(st.seen["study.omega_range"], "study.omega_range and study.omega_list are both set (line " +
                                                          std::to_string(st.seen["study.omega_list"]) + ")");
        }
        st.cfg.omega_list = *st.omega_range;
    }
    if (st.cfg.source.kind == SourceSpec::Kind::GaussianBump) {
        const SourceSpec canonical = SourceSpec::canonical_bump(st.cfg.params.a, st.cfg.params.b);
        if (!st.bump_center) {
            st.cfg.source.center_x1 = canonical.center_x1;
            st.cfg.source.center_x2 = canonical.center_x2;
        }
        if (!st.bump_width) {
            st.cfg.source.width = canonical.width;
        }
    }
    validate_config(st.cfg);
    return st.cfg;
}

StudyConfig parse_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        fail(ErrorCode::IoError, "cannot open configuration " + path.string());
    }
    return parse_config(in);
}

StudyConfig parse_config_text(std::string_view text)
{
    std::istringstream in{std::string(text)};
    return parse_config(in);
}

std::string format_config(const StudyConfig& c)
{
    std::ostringstream os;
    const auto kv = [&os](const char* key, const std::string& value) { os << key << " = " << value << '\n'; };
    const auto num = [&kv](const char* key, double v) { kv(key, format_number(v)); };
    num("geometry.a", c.params.a);
    num("geometry.b", c.params.b);
    num("geometry.L", c.params.L);
    num("geometry.V", c.params.V);
    num("geometry.alpha", c.params.alpha);
    num("geometry.eps", c.params.eps);
    num("geometry.omega", c.params.omega);
    kv("study.eps_list", format_list(c.eps_list));
    kv("study.omega_list", format_list(c.omega_list));
    kv("study.threads", std::to_string(c.threads));
    kv("source.kind", to_string(c.source.kind));
    kv("source.m", std::to_string(c.source.m));
    kv("source.n", std::to_string(c.source.n));
    kv("source.center", format_number(c.source.center_x1) + "," + format_number(c.source.center_x2));
    num("source.width", c.source.width);
    num("source.value", c.source.value);
    kv("resolution.n_w", std::to_string(c.resolution.n_w));
    kv("resolution.n_l", std::to_string(c.resolution.n_l));
    kv("resolution.n_s", std::to_string(c.resolution.n_s));
    num("resolution.h", c.resolution.h);
    num("resolution.grading", c.resolution.grading);
    kv("resolution.max_unknowns", std::to_string(c.resolution.max_unknowns));
    num("resolution.h_per_eps", c.h_per_eps);
    kv("check.levels", format_list(c.check_levels));
    kv("sweep.mode", to_string(c.sweep_mode));
    kv("sweep.forcing", to_string(c.sweep_forcing));
    num("sweep.trace_value", c.trace_value);
    kv("output.dir", c.outputs.dir);
    kv("output.profiles", c.outputs.profiles ? "true" : "false");
    kv("output.grid_dump", c.outputs.grid_dump ? "true" : "false");
    kv("output.matrix_dump", c.outputs.matrix_dump ? "true" : "false");
    return os.str();
}

const std::vector<std::string>& report_columns()
{
    static const std::vector<std::string> columns{"eps",  "omega", "E_u_L2", "E_v_L2", "E_w_L1", "R_fr_L1",
                                                  "R_mc", "rate_u", "d2_l1", "d1_l1", "residual", "wall_ms"};
    return columns;
}

void write_report_csv(std::ostream& os, const StudyReport& report)
{
    const auto& cols = report_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) {
        os << (i ? "," : "") << cols[i];
    }
    os << '\n';
    for (const StudyRow& r : report.rows) {
        const double values[] = {r.eps,  r.omega,  r.E_u_L2, r.E_v_L2, r.E_w_L1,   r.R_fr_L1,
                                 r.R_mc, r.rate_u, r.d2_l1,  r.d1_l1,  r.residual, r.wall_ms};
        for (std::size_t i = 0; i < std::size(values); ++i) {
            os << (i ? "," : "") << format_number(values[i]);
        }
        os << '\n';
    }
}

void write_profile_csv(std::ostream& os, const NamedProfile& profile)
{
    os << "x1,value\n";
    for (std::size_t i = 0; i < profile.x1.size(); ++i) {
        os << format_number(profile.x1[i]) << ',' << format_number(profile.values[i]) << '\n';
    }
}

RunManifest emit_report(const StudyReport& report, const std::filesystem::path& dir, const StudyConfig& cfg,
                        EmitOptions options)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        fail(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
    }
    RunManifest manifest;
    manifest.config_echo = format_config(cfg);
    manifest.tool_version = std::string(tool_version());
    manifest.timestamp = utc_timestamp();

    const std::string stem = to_string(report.kind);
    write_file(dir / (stem + ".csv"), [&](std::ostream& os) { write_report_csv(os, report); }, manifest.files);
    write_file(dir / (stem + "_extras.csv"),
               [&](std::ostream& os) {
                   os << "row,key,value\n";
                   for (std::size_t i = 0; i < report.rows.size(); ++i) {
                       for (const auto& [k, v] : report.rows[i].extras) {
                           os << i << ',' << csv_field(k) << ',' << format_number(v) << '\n';
                       }
                   }
               },
               manifest.files);
    write_file(dir / (stem + "_status.csv"),
               [&](std::ostream& os) {
                   os << "row,label,status,note\n";
                   for (std::size_t i = 0; i < report.rows.size(); ++i) {
                       const StudyRow& r = report.rows[i];
                       os << i << ',' << csv_field(r.label) << ',' << to_string(r.status) << ',' << csv_field(r.note)
                          << '\n';
                   }
               },
               manifest.files);
    write_file(dir / (stem + "_summary.csv"),
               [&](std::ostream& os) {
                   os << "key,value\n";
                   for (const auto& [k, v] : report.summary) {
                       os << csv_field(k) << ',' << format_number(v) << '\n';
                   }
               },
               manifest.files);
    write_file(dir / (stem + "_gates.csv"),
               [&](std::ostream& os) {
                   os << "gate,passed,detail\n";
                   for (const Gate& g : report.gates) {
                       os << csv_field(g.name) << ',' << (g.passed ? "true" : "false") << ',' << csv_field(g.detail)
                          << '\n';
                   }
               },
               manifest.files);
    if (options.profiles && !report.profiles.empty()) {
        const auto pdir = dir / "profiles";
        std::filesystem::create_directories(pdir, ec);
        if (ec) {
            fail(ErrorCode::IoError, "cannot create " + pdir.string() + ": " + ec.message());
        }
        for (const NamedProfile& p : report.profiles) {
            write_file(pdir / (p.name + ".csv"), [&](std::ostream& os) { write_profile_csv(os, p); }, manifest.files);
        }
    }
    write_file(dir / "resolved.conf", [&](std::ostream& os) { os << manifest.config_echo; }, manifest.files);

    const auto manifest_path = dir / "manifest.txt";
    manifest.files.push_back(manifest_path);
    std::vector<std::filesystem::path> written;
    write_file(manifest_path,
               [&](std::ostream& os) {
                   os << "tool_version = " << manifest.tool_version << '\n';
                   os << "timestamp = " << manifest.timestamp << '\n';
                   os << "command = " << stem << '\n';
                   for (const auto& f : manifest.files) {
                       os << "file = " << f.lexically_relative(dir).generic_string() << '\n';
                   }
                   os << "\n[config]\n" << manifest.config_echo;
               },
               written);
    return manifest;
}

std::string_view tool_version() noexcept { return PERFWALL_VERSION; }

} // namespace perfwall
