#pragma once

#include <stdexcept>
#include <string>

namespace kpiguard {

/// Coarse failure category. Each maps onto one CLI exit code.
enum class ErrorKind {
    Usage,     // bad arguments or configuration (exit 2)
    Data,      // parse, schema, ordering or I/O problems (exit 3)
    Numeric,   // training divergence, degenerate solves (exit 4)
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct UsageError : Error {
    explicit UsageError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

struct ParseError : Error {
    explicit ParseError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

struct SchemaError : Error {
    explicit SchemaError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

struct OrderingError : Error {
    explicit OrderingError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

struct RangeError : Error {
    explicit RangeError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

struct InsufficientDataError : Error {
    explicit InsufficientDataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

struct TrainingError : Error {
    explicit TrainingError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

struct NumericError : Error {
    explicit NumericError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

/// Raised when a model is used before its thresholds or statistics exist.
struct CalibrationError : Error {
    explicit CalibrationError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

inline int exit_code(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Usage: return 2;
    case ErrorKind::Data: return 3;
    case ErrorKind::Numeric: return 4;
    }
    return 1;
}

} // namespace kpiguard
