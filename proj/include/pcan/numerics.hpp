#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace pcan {

using Vec = std::vector<double>;

/// Dense row-major matrix of doubles. Small enough on purpose: all training
/// math in this project runs in 64-bit with fixed iteration order.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vec data;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }
    Vec row_vec(std::size_t r) const { return Vec(row(r), row(r) + cols); }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
    bool operator==(const Mat& o) const = default;
};

inline constexpr double kNormEps = 1e-12;

double dot(const double* a, const double* b, std::size_t n);
double dot(const Vec& a, const Vec& b);
double norm(const double* a, std::size_t n);
double norm(const Vec& a);

/// Cosine similarity clamped to [-1, 1]. Throws degenerate_input_error when
/// either norm is <= 1e-12; losses that need the treat-as-zero fallback use
/// cos_sim_or_zero instead.
double cos_sim(const Vec& a, const Vec& b);
double cos_sim(const double* a, const double* b, std::size_t n);

/// Degenerate-tolerant cosine used inside losses and the forward pass: a
/// near-zero norm yields similarity 0 (and the caller must treat the pair as
/// gradient-free). Bumps the diagnostic counter when it fires.
double cos_sim_or_zero(const double* a, const double* b, std::size_t n, bool* degenerate = nullptr);

/// Gradient of cos(a, b) with respect to a, written into grad (length n).
/// Writes zeros for degenerate inputs.
void cos_sim_grad_wrt_a(const double* a, const double* b, std::size_t n, double* grad);

/// Max-subtraction softmax; output sums to 1 within 1e-12 and preserves argmax.
Vec softmax(const Vec& z);
void softmax_inplace(const double* z, double* out, std::size_t n);

double log_sum_exp(const Vec& z);

int argmax(const Vec& z);
int argmax(const double* z, std::size_t n);

// --- finite-difference gradient certification ----------------------------

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double analytic_at_worst = 0.0;
    double numeric_at_worst = 0.0;
};

/// Central-difference check of an analytic gradient:
///   err_j = |analytic_j - cd_j| / max(1, |analytic_j|, |cd_j|),
///   cd_j  = (f(x + h e_j) - f(x - h e_j)) / (2 h).
/// Throws contract_error if f produces a non-finite value, naming the coordinate.
GradCheckResult grad_check(const std::function<double(const Vec&)>& f, const Vec& x0,
                           const Vec& analytic, double h = 1e-5);

// --- deterministic random stream ------------------------------------------

/// mt19937_64 with portable uniform/normal draws (stateless Box-Muller), so a
/// seed pins the exact value sequence and the engine state round-trips through
/// checkpoints as a string.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in (0, 1): never returns 0 so log() is always safe.
    double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    /// Uniform integer in [0, n).
    std::size_t below(std::size_t n) {
        // Rejection-free modulo is fine here: n is tiny relative to 2^64.
        return static_cast<std::size_t>(engine_() % n);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }

    std::string state() const;
    void set_state(const std::string& s);

private:
    std::mt19937_64 engine_;
};

} // namespace pcan
