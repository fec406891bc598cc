#pragma once

#include <stdexcept>
#include <string>

namespace mirrorsim {

/// Failure category, mapped by the CLI onto its exit-code contract
/// (solver -> 1, syntax -> 2, io -> 3).
enum class ErrorKind { syntax, validation, solver, io };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message, int line = 0)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message
                                      : message),
          kind(kind),
          line(line) {}

    ErrorKind kind;
    int line; ///< 1-based source line for syntax/validation errors, 0 otherwise
};

} // namespace mirrorsim
