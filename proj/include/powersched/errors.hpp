#pragma once

#include <stdexcept>
#include <string>

namespace powersched {

// Error taxonomy mirrored by the CLI exit codes: config/schema problems,
// infeasible channel or cost configurations, unsupported dimensions, and
// iterative solvers giving up.

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct DimensionError : std::invalid_argument {
    explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

struct InfeasibleError : std::runtime_error {
    explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

struct ConvergenceError : std::runtime_error {
    explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace powersched
