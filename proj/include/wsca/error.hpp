#pragma once

#include <stdexcept>
#include <string>

namespace wsca {

enum class ErrorKind {
    InvalidInput,
    Format,
    Shape,
    Key,
    Config,
    InfeasibleComposition,
    DegenerateBinning,
    DegenerateLabels,
    DegenerateManifold,
    EmptyInput,
    UndefinedMetric,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidInput: return "InvalidInput";
        case ErrorKind::Format: return "FormatError";
        case ErrorKind::Shape: return "ShapeError";
        case ErrorKind::Key: return "KeyError";
        case ErrorKind::Config: return "ConfigError";
        case ErrorKind::InfeasibleComposition: return "InfeasibleComposition";
        case ErrorKind::DegenerateBinning: return "DegenerateBinning";
        case ErrorKind::DegenerateLabels: return "DegenerateLabels";
        case ErrorKind::DegenerateManifold: return "DegenerateManifold";
        case ErrorKind::EmptyInput: return "EmptyInput";
        case ErrorKind::UndefinedMetric: return "UndefinedMetric";
    }
    return "Error";
}

/// Single exception type for the library; the kind drives CLI exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), detail_(what) {}

    ErrorKind kind() const noexcept { return kind_; }
    /// Message without the kind prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorKind kind_;
    std::string detail_;
};

/// Process exit code for an error kind: 2 input/format, 3 infeasible, 4 degenerate.
inline int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Config:
        case ErrorKind::InfeasibleComposition:
            return 3;
        case ErrorKind::DegenerateBinning:
        case ErrorKind::DegenerateLabels:
        case ErrorKind::DegenerateManifold:
        case ErrorKind::EmptyInput:
        case ErrorKind::UndefinedMetric:
            return 4;
        default:
            return 2;
    }
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
    if (!cond) fail(kind, what);
}

}  // namespace wsca
