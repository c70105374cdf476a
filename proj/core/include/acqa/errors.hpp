#pragma once

#include <stdexcept>
#include <string>

namespace acqa {

// Bad or unreadable input data (corpora, pair files, checkpoints on disk).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Violated model/graph contract: shape mismatches, out-of-range ids,
// broken internal invariants.
class ModelError : public std::runtime_error {
public:
    explicit ModelError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration values (epochs < 1, bad enum strings, ...).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace acqa
