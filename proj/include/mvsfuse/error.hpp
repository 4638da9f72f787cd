#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mvsfuse {

/// Base class of every error thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidArgument : Error { using Error::Error; };

// geometry / projection
struct DegenerateProjection : Error { using Error::Error; };
struct EmptyCloud : Error { using Error::Error; };
struct InvalidCount : Error { using Error::Error; };

// registration
struct TooFewMatches : Error { using Error::Error; };
struct DegenerateConfiguration : Error { using Error::Error; };
struct NoCorrespondences : Error { using Error::Error; };

// filtering
struct MissingColors : Error { using Error::Error; };
struct TooFewPoints : Error { using Error::Error; };
struct EmptyList : Error { using Error::Error; };

// blending
struct DimensionMismatch : Error { using Error::Error; };
struct SolverDivergence : Error { using Error::Error; };
struct ChannelMismatch : Error { using Error::Error; };

// evaluation
struct InvalidTau : Error { using Error::Error; };

// io
struct MissingPositions : Error { using Error::Error; };
struct UnsupportedCameraModel : Error { using Error::Error; };
struct BadHeader : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct InvariantViolation : Error { using Error::Error; };

// cli / config
struct ConfigError : Error { using Error::Error; };

/// Parse failure that remembers where in the input it happened.
struct ParseError : Error {
    std::size_t offset = 0;

    ParseError(const std::string& msg, std::size_t off, const char* unit)
        : Error(msg + " (" + unit + " " + std::to_string(off) + ")"), offset(off) {}
    explicit ParseError(const std::string& msg) : Error(msg) {}

    static ParseError at_line(const std::string& msg, std::size_t line) {
        return {msg, line, "line"};
    }
    static ParseError at_byte(const std::string& msg, std::size_t byte) {
        return {msg, byte, "byte"};
    }
};

}  // namespace mvsfuse
