#pragma once

#include <cstdlib>
#include <iostream>
#include <string>

namespace acqa {

// Verbosity comes from the ACQA_LOG environment variable:
// 0 = silent, 1 = warnings (default), 2 = info.
inline int log_level() {
    static const int level = [] {
        const char* v = std::getenv("ACQA_LOG");
        if (v == nullptr || *v == '\0') {
            return 1;
        }
        return std::atoi(v);
    }();
    return level;
}

inline void log_warn(const std::string& msg) {
    if (log_level() >= 1) {
        std::cerr << "warning: " << msg << "\n";
    }
}

inline void log_info(const std::string& msg) {
    if (log_level() >= 2) {
        std::cerr << "info: " << msg << "\n";
    }
}

} // namespace acqa
