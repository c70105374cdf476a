#pragma once

#include <optional>

namespace acqa {

inline constexpr const char* kToolVersion = "0.1.0";

// Config precedence: built-in default < config file < CLI flag.
template <class T>
T resolve_option(const T& builtin, const std::optional<T>& file_value,
                 const std::optional<T>& flag_value) {
    if (flag_value.has_value()) {
        return *flag_value;
    }
    if (file_value.has_value()) {
        return *file_value;
    }
    return builtin;
}

// Entry point behind tools/acqa. Exit codes: 0 success, 1 usage/config
// error, 2 data or model error.
int run_cli(int argc, const char* const* argv);

} // namespace acqa
