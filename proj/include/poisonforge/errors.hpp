#pragma once

#include <stdexcept>
#include <string>

namespace poisonforge {

// Error taxonomy mirrored by the CLI exit codes: config/schema problems exit
// 2, I/O problems exit 1, numerical divergence exits 3.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DivergenceError : std::runtime_error {
    explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

// Analytic domain violations (e.g. bound evaluated outside its validity
// region); reported as config errors at the CLI boundary.
struct DomainError : ConfigError {
    explicit DomainError(const std::string& msg) : ConfigError(msg) {}
};

} // namespace poisonforge
