#include "ragev/error.hpp"

namespace ragev {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "invalid-argument";
        case ErrorKind::Conflict: return "conflict";
        case ErrorKind::ParseError: return "parse-error";
        case ErrorKind::InvalidLabel: return "invalid-label";
        case ErrorKind::TransportError: return "transport-error";
        case ErrorKind::InsufficientData: return "insufficient-data";
        case ErrorKind::NotFound: return "not-found";
    }
    return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

ParseError::ParseError(std::size_t line, const std::string& message)
    : Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": " + message), line_(line) {}

TransportError::TransportError(const std::string& message, int attempts,
                               std::optional<int> last_status)
    : Error(ErrorKind::TransportError,
            message + " (attempts=" + std::to_string(attempts) +
                (last_status ? ", status=" + std::to_string(*last_status) : std::string()) + ")"),
      attempts_(attempts),
      last_status_(last_status) {}

void throw_invalid(const std::string& message) {
    throw Error(ErrorKind::InvalidArgument, message);
}

}  // namespace ragev
