#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace ragev {

enum class ErrorKind {
    InvalidArgument,
    Conflict,
    ParseError,
    InvalidLabel,
    TransportError,
    InsufficientData,
    NotFound,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library. Callers branch on kind(); the CLI maps
// kinds onto its exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

// Malformed input at a known 1-based line.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& message);

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Remote call failed after exhausting retries.
class TransportError : public Error {
public:
    TransportError(const std::string& message, int attempts, std::optional<int> last_status);

    int attempts() const noexcept { return attempts_; }
    std::optional<int> last_status() const noexcept { return last_status_; }

private:
    int attempts_;
    std::optional<int> last_status_;
};

[[noreturn]] void throw_invalid(const std::string& message);

}  // namespace ragev
