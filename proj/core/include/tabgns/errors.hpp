#pragma once

#include <stdexcept>
#include <string>

namespace tabgns {

// Error taxonomy shared by the library and the CLI. The CLI maps each class
// to a stable exit code (see experiment.hpp).

/// Malformed configuration or command-line usage.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Bad or inconsistent input data (missing values, unknown columns, ...).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Dimension mismatch between tensors/models/datasets.
class ShapeError : public DataError {
public:
    explicit ShapeError(const std::string& what) : DataError(what) {}
};

/// Non-finite values where finite ones are required (diverged training, ...).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Corrupt or truncated checkpoint file.
class IntegrityError : public std::runtime_error {
public:
    explicit IntegrityError(const std::string& what) : std::runtime_error(what) {}
};

/// Run directory contents that cannot be read as a report.
class SchemaError : public std::runtime_error {
public:
    explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace tabgns
