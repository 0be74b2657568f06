#pragma once

#include <atomic>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace pcan {

// Contract violations: caller passed arguments that break a documented
// precondition (shape mismatch, empty set where non-empty is required, ...).
class contract_error : public std::runtime_error {
public:
    explicit contract_error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input files. Carries enough context to name the offending line.
class parse_error : public std::runtime_error {
public:
    explicit parse_error(const std::string& what) : std::runtime_error(what) {}
};

// Numerically degenerate input (near-zero norm vector where a direction is needed).
class degenerate_input_error : public std::runtime_error {
public:
    explicit degenerate_input_error(const std::string& what) : std::runtime_error(what) {}
};

// Infeasible synthetic-data geometry.
class generation_error : public std::runtime_error {
public:
    explicit generation_error(const std::string& what) : std::runtime_error(what) {}
};

namespace diag {

// Counts cosine evaluations that hit the degenerate (near-zero norm) fallback
// inside losses and the forward pass. Diagnostics only; never affects results.
std::atomic<std::uint64_t>& degenerate_cosine_counter();

inline void note_degenerate_cosine() { degenerate_cosine_counter().fetch_add(1, std::memory_order_relaxed); }
inline std::uint64_t degenerate_cosine_count() { return degenerate_cosine_counter().load(std::memory_order_relaxed); }
inline void reset_degenerate_cosine_count() { degenerate_cosine_counter().store(0, std::memory_order_relaxed); }

enum class LogLevel { debug = 0, info = 1, warn = 2 };

// Level comes from PCAN_LOG (debug|info|warn); defaults to warn.
LogLevel log_level();
void log(LogLevel level, const std::string& msg);

} // namespace diag

// FNV-1a over a byte string; used for config hashes in checkpoints.
std::uint64_t fnv1a64(const std::string& bytes);

} // namespace pcan
