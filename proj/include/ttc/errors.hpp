#pragma once

#include <stdexcept>
#include <string>

namespace ttc {

/// Input data violates a schema or an invariant (maps to CLI exit code 3).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string &msg) : std::runtime_error(msg) {}
};

/// Filesystem or network failure (maps to CLI exit code 2).
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string &msg) : std::runtime_error(msg) {}
};

} // namespace ttc
