#pragma once

#include <stdexcept>
#include <string>

namespace dshell {

// One value per failure class; the CLI maps these to exit codes.
enum class ErrorKind {
    invalid_argument = 2,
    inadmissible_energy = 3,
    invalid_coupling = 4,
    critical_coupling = 5,
    singular = 6,
    unsupported = 7,
    too_close = 8,
    not_converged = 9,
    io = 10,
    config = 11,
    invalid_grid = 12,
};

inline const char* to_string(ErrorKind k) {
    switch (k) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::inadmissible_energy: return "inadmissible_energy";
    case ErrorKind::invalid_coupling: return "invalid_coupling";
    case ErrorKind::critical_coupling: return "critical_coupling";
    case ErrorKind::singular: return "singular";
    case ErrorKind::unsupported: return "unsupported";
    case ErrorKind::too_close: return "too_close";
    case ErrorKind::not_converged: return "not_converged";
    case ErrorKind::io: return "io";
    case ErrorKind::config: return "config";
    case ErrorKind::invalid_grid: return "invalid_grid";
    }
    return "unknown";
}

struct Error : std::runtime_error {
    ErrorKind kind;
    Error(ErrorKind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

[[noreturn]] inline void fail(ErrorKind k, const std::string& msg) { throw Error(k, msg); }

} // namespace dshell
