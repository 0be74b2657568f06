#include "pcan/common.hpp"

#include <cstdlib>
#include <iostream>

namespace pcan {

namespace diag {

std::atomic<std::uint64_t>& degenerate_cosine_counter() {
    static std::atomic<std::uint64_t> counter{0};
    return counter;
}

LogLevel log_level() {
    static LogLevel level = [] {
        const char* env = std::getenv("PCAN_LOG");
        if (env == nullptr) return LogLevel::warn;
        const std::string v(env);
        if (v == "debug") return LogLevel::debug;
        if (v == "info") return LogLevel::info;
        return LogLevel::warn;
    }();
    return level;
}

void log(LogLevel level, const std::string& msg) {
    if (static_cast<int>(level) < static_cast<int>(log_level())) return;
    const char* tag = level == LogLevel::debug ? "debug" : level == LogLevel::info ? "info" : "warn";
    std::cerr << "[pcan " << tag << "] " << msg << "\n";
}

} // namespace diag

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace pcan
