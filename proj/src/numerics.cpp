#include "pcan/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pcan/common.hpp"

namespace pcan {

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw contract_error("dot: length mismatch");
    return dot(a.data(), b.data(), a.size());
}

double norm(const double* a, std::size_t n) { return std::sqrt(dot(a, a, n)); }
double norm(const Vec& a) { return norm(a.data(), a.size()); }

double cos_sim(const double* a, const double* b, std::size_t n) {
    const double na = norm(a, n);
    const double nb = norm(b, n);
    if (na <= kNormEps || nb <= kNormEps) {
        throw degenerate_input_error("cos_sim: vector norm below 1e-12");
    }
    return std::clamp(dot(a, b, n) / (na * nb), -1.0, 1.0);
}

double cos_sim(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw contract_error("cos_sim: length mismatch");
    return cos_sim(a.data(), b.data(), a.size());
}

double cos_sim_or_zero(const double* a, const double* b, std::size_t n, bool* degenerate) {
    const double na = norm(a, n);
    const double nb = norm(b, n);
    if (na <= kNormEps || nb <= kNormEps) {
        diag::note_degenerate_cosine();
        if (degenerate) *degenerate = true;
        return 0.0;
    }
    if (degenerate) *degenerate = false;
    return std::clamp(dot(a, b, n) / (na * nb), -1.0, 1.0);
}

void cos_sim_grad_wrt_a(const double* a, const double* b, std::size_t n, double* grad) {
    const double na = norm(a, n);
    const double nb = norm(b, n);
    if (na <= kNormEps || nb <= kNormEps) {
        std::fill(grad, grad + n, 0.0);
        return;
    }
    const double c = dot(a, b, n) / (na * nb);
    const double inv = 1.0 / (na * nb);
    const double na2 = na * na;
    for (std::size_t i = 0; i < n; ++i) grad[i] = b[i] * inv - c * a[i] / na2;
}

void softmax_inplace(const double* z, double* out, std::size_t n) {
    double m = z[0];
    for (std::size_t i = 1; i < n; ++i) m = std::max(m, z[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::exp(z[i] - m);
        sum += out[i];
    }
    for (std::size_t i = 0; i < n; ++i) out[i] /= sum;
}

Vec softmax(const Vec& z) {
    Vec out(z.size());
    if (!z.empty()) softmax_inplace(z.data(), out.data(), z.size());
    return out;
}

double log_sum_exp(const Vec& z) {
    double m = z[0];
    for (double v : z) m = std::max(m, v);
    double s = 0.0;
    for (double v : z) s += std::exp(v - m);
    return m + std::log(s);
}

int argmax(const double* z, std::size_t n) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i) {
        if (z[i] > z[best]) best = i;
    }
    return static_cast<int>(best);
}

int argmax(const Vec& z) { return argmax(z.data(), z.size()); }

GradCheckResult grad_check(const std::function<double(const Vec&)>& f, const Vec& x0,
                           const Vec& analytic, double h) {
    if (x0.size() != analytic.size()) throw contract_error("grad_check: gradient length mismatch");
    GradCheckResult result;
    Vec x = x0;
    for (std::size_t j = 0; j < x0.size(); ++j) {
        x[j] = x0[j] + h;
        const double fp = f(x);
        x[j] = x0[j] - h;
        const double fm = f(x);
        x[j] = x0[j];
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            std::ostringstream os;
            os << "grad_check: non-finite f at coordinate " << j;
            throw contract_error(os.str());
        }
        const double cd = (fp - fm) / (2.0 * h);
        const double denom = std::max({1.0, std::fabs(analytic[j]), std::fabs(cd)});
        const double err = std::fabs(analytic[j] - cd) / denom;
        if (err > result.max_rel_error) {
            result.max_rel_error = err;
            result.worst_index = j;
            result.analytic_at_worst = analytic[j];
            result.numeric_at_worst = cd;
        }
    }
    return result;
}

std::string Rng::state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
}

void Rng::set_state(const std::string& s) {
    std::istringstream is(s);
    is >> engine_;
    if (is.fail()) throw parse_error("Rng::set_state: malformed engine state");
}

} // namespace pcan
