#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace perfwall {

enum class ErrorCode {
    NonPositiveParameter,
    NonIntegerPeriodCount,
    ChannelTooWide,
    InvalidResolution,
    GridTooLarge,
    GridMismatch,
    SingularMatrix,
    FactorizationFailure,
    NoTraceLine,
    NoStripInGrid,
    NoChannelsInGrid,
    ResonantMode,
    ParseError,
    UnknownKey,
    ValidationError,
    IoError,
};

[[nodiscard]] std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library. `code()` identifies the failure class;
/// `what()` carries a human-readable explanation.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

// Non-fatal conditions (near-eigenvalue frequencies and the like) go through a
// process-wide sink. The default writes "warning: ..." to stderr.
using WarningHandler = std::function<void(std::string_view)>;

WarningHandler set_warning_handler(WarningHandler handler);
void warn(std::string_view message);

} // namespace perfwall
