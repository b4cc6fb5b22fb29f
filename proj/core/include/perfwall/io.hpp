#pragma once

#include "perfwall/harness.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace perfwall {

/// Parses `key = value` lines with dotted keys and `#` comments. Unknown keys
/// throw UnknownKey, malformed lines and duplicates throw ParseError (with line
/// numbers), and the resolved configuration is checked with validate_config.
[[nodiscard]] StudyConfig parse_config(std::istream& in);
[[nodiscard]] StudyConfig parse_config(const std::filesystem::path& path);
[[nodiscard]] StudyConfig parse_config_text(std::string_view text);

/// Every key with its resolved value, in the grammar parse_config reads.
[[nodiscard]] std::string format_config(const StudyConfig& cfg);

/// Shortest decimal that parses back to the same double; empty for NaN.
[[nodiscard]] std::string format_number(double v);

/// Column order of the main report CSV.
[[nodiscard]] const std::vector<std::string>& report_columns();

struct EmitOptions {
    bool profiles = false;
};

struct RunManifest {
    std::string config_echo;
    std::string tool_version;
    std::string timestamp;
    std::vector<std::filesystem::path> files;
};

void write_report_csv(std::ostream& os, const StudyReport& report);
void write_profile_csv(std::ostream& os, const NamedProfile& profile);

/// Writes the report CSVs (main, extras, status, summary, gates), optional
/// profiles, the resolved configuration and a manifest into `dir`. Throws
/// IoError when anything cannot be written.
RunManifest emit_report(const StudyReport& report, const std::filesystem::path& dir, const StudyConfig& cfg,
                        EmitOptions options = {});

[[nodiscard]] std::string_view tool_version() noexcept;

} // namespace perfwall
