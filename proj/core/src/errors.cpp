#include "perfwall/errors.hpp"

#include <iostream>
#include <mutex>
#include <utility>

namespace perfwall {

std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::NonPositiveParameter: return "NonPositiveParameter";
    case ErrorCode::NonIntegerPeriodCount: return "NonIntegerPeriodCount";
    case ErrorCode::ChannelTooWide: return "ChannelTooWide";
    case ErrorCode::InvalidResolution: return "InvalidResolution";
    case ErrorCode::GridTooLarge: return "GridTooLarge";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::SingularMatrix: return "SingularMatrix";
    case ErrorCode::FactorizationFailure: return "FactorizationFailure";
    case ErrorCode::NoTraceLine: return "NoTraceLine";
    case ErrorCode::NoStripInGrid: return "NoStripInGrid";
    case ErrorCode::NoChannelsInGrid: return "NoChannelsInGrid";
    case ErrorCode::ResonantMode: return "ResonantMode";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnknownKey: return "UnknownKey";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message)
    , code_(code)
{
}

void fail(ErrorCode code, const std::string& message)
{
    throw Error(code, message);
}

namespace {

std::mutex& handler_mutex()
{
    static std::mutex m;
    return m;
}

WarningHandler& handler_slot()
{
    static WarningHandler h = [](std::string_view msg) { std::cerr << "warning: " << msg << '\n'; };
    return h;
}

} // namespace

WarningHandler set_warning_handler(WarningHandler handler)
{
    std::lock_guard lock(handler_mutex());
    return std::exchange(handler_slot(), std::move(handler));
}

void warn(std::string_view message)
{
    std::lock_guard lock(handler_mutex());
    if (handler_slot()) {
        handler_slot()(message);
    }
}

} // namespace perfwall
