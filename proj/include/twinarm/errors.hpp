#pragma once

#include <stdexcept>
#include <string>

namespace twinarm {

// Bad or inconsistent configuration / command usage (CLI exit 2).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Unreadable, corrupt, or shape-mismatched checkpoint (CLI exit 3).
struct CheckpointError : std::runtime_error {
    explicit CheckpointError(const std::string& what) : std::runtime_error(what) {}
};

// API misuse, e.g. stepping a terminal environment state.
struct UsageError : std::logic_error {
    explicit UsageError(const std::string& what) : std::logic_error(what) {}
};

// Socket / transport failures (CLI exit 1).
struct NetError : std::runtime_error {
    explicit NetError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace twinarm
