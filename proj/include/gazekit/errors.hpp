#pragma once

#include <stdexcept>
#include <string>

namespace gazekit {

/// Base class for all gazekit errors so callers can catch the whole family.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raw input could not be decoded into any supported tabular structure.
struct UnreadableInput : Error {
    using Error::Error;
};

/// Every inter-sample delta was <= 0; time units cannot be detected.
struct NoPositiveDeltas : Error {
    using Error::Error;
};

/// Cleaning removed every row.
struct EmptyAfterCleaning : Error {
    using Error::Error;
};

/// Pixel coordinates were supplied without a GeometryConfig.
struct MissingGeometry : Error {
    using Error::Error;
};

/// A detector was invoked on an empty series.
struct EmptyInput : Error {
    using Error::Error;
};

/// As-of alignment found no pair within tolerance.
struct NoMatches : Error {
    using Error::Error;
};

/// The chat-completion provider timed out or was unreachable.
struct ProviderTimeout : Error {
    using Error::Error;
};

/// Provider responded, but no valid schema JSON could be extracted.
/// Carries the raw response text for audit.
struct SchemaValidationFailed : Error {
    SchemaValidationFailed(const std::string& what, std::string raw)
        : Error(what), raw_response(std::move(raw)) {}

    std::string raw_response;
};

}  // namespace gazekit
