#pragma once

#include <stdexcept>
#include <string>

namespace diass {

/// Score text could not be parsed; carries a 1-based source location.
class ParseError : public std::runtime_error {
public:
    ParseError(std::string message, int line, int column)
        : std::runtime_error(std::move(message)), line_(line), column_(column) {}
    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

/// Structurally valid input violating a semantic rule (Nyquist, envelope
/// shape, duplicate ids, ...).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Failure while computing audio (worker failure, frequency out of range,
/// anticlip non-convergence).
class RenderError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace diass
