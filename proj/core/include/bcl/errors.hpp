#pragma once

#include <stdexcept>
#include <string>

namespace bcl {

// Error taxonomy; the CLI maps these onto process exit codes
// (config -> 2, numeric -> 3, integrity -> 4).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ProtocolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IntegrityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace bcl
