#include "pcan/prototype.hpp"

#include <cmath>

#include "pcan/common.hpp"

namespace pcan {

PrototypeBank init_bank(const ActionTree& tree, std::size_t d, std::uint64_t seed, double rho) {
    if (d < 1) throw contract_error("init_bank: d must be >= 1");
    if (rho < 0.0 || rho >= 1.0) throw contract_error("init_bank: rho must be in [0, 1)");
    PrototypeBank bank;
    bank.rho = rho;
    bank.init_seed = seed;
    bank.p_body = Mat(tree.n_body, d);
    bank.p_action = Mat(tree.n_action, d);
    bank.update_counts_body.assign(tree.n_body, 0);
    bank.update_counts_action.assign(tree.n_action, 0);

    Rng rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    auto fill = [&](Mat& m) {
        for (std::size_t r = 0; r < m.rows; ++r) {
            for (std::size_t c = 0; c < m.cols; ++c) m(r, c) = rng.normal() * scale;
            const double n = norm(m.row(r), m.cols);
            for (std::size_t c = 0; c < m.cols; ++c) m(r, c) /= n;
        }
    };
    fill(bank.p_body);
    fill(bank.p_action);
    return bank;
}

void ema_update(PrototypeBank& bank, Level level, int k, const std::vector<const double*>& confident_feats) {
    if (confident_feats.empty()) {
        throw contract_error("ema_update: confident feature set is empty (caller must skip)");
    }
    Mat& p = level == Level::body ? bank.p_body : bank.p_action;
    auto& counts = level == Level::body ? bank.update_counts_body : bank.update_counts_action;
    if (k < 0 || static_cast<std::size_t>(k) >= p.rows) throw contract_error("ema_update: class out of range");

    const std::size_t d = p.cols;
    const double inv_n = 1.0 / static_cast<double>(confident_feats.size());
    double* row = p.row(k);
    for (std::size_t c = 0; c < d; ++c) {
        double mean = 0.0;
        for (const double* f : confident_feats) mean += f[c];
        mean *= inv_n;
        row[c] = (1.0 - bank.rho) * mean + bank.rho * row[c];
    }
    ++counts[k];
}

void ema_update(PrototypeBank& bank, Level level, int k, const std::vector<Vec>& confident_feats) {
    std::vector<const double*> ptrs;
    ptrs.reserve(confident_feats.size());
    for (const Vec& v : confident_feats) ptrs.push_back(v.data());
    ema_update(bank, level, k, ptrs);
}

PdaResult pda_loss(const Mat& prototypes) {
    const std::size_t n = prototypes.rows;
    const std::size_t d = prototypes.cols;

    // L = ||S|| with S = sum_i p_i / ||p_i||; the double cosine sum collapses
    // to S.S because the diagonal contributes exactly n.
    std::vector<double> row_norms(n);
    for (std::size_t i = 0; i < n; ++i) {
        row_norms[i] = norm(prototypes.row(i), d);
        if (row_norms[i] <= kNormEps) {
            throw degenerate_input_error("pda_loss: prototype row " + std::to_string(i) +
                                         " has near-zero norm");
        }
    }
    Vec s(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* p = prototypes.row(i);
        for (std::size_t c = 0; c < d; ++c) s[c] += p[c] / row_norms[i];
    }

    PdaResult result;
    result.value = norm(s);
    result.grad = Mat(n, d);
    if (result.value <= kNormEps) return result;  // ||S|| not differentiable at 0; stay at 0

    // dL/dp_i = (S - (u_i . S) u_i) / (||p_i|| * L), u_i = p_i / ||p_i||.
    for (std::size_t i = 0; i < n; ++i) {
        const double* p = prototypes.row(i);
        double us = 0.0;
        for (std::size_t c = 0; c < d; ++c) us += (p[c] / row_norms[i]) * s[c];
        double* g = result.grad.row(i);
        const double inv = 1.0 / (row_norms[i] * result.value);
        for (std::size_t c = 0; c < d; ++c) {
            g[c] = (s[c] - us * p[c] / row_norms[i]) * inv;
        }
    }
    return result;
}

} // namespace pcan
