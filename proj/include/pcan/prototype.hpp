#pragma once

#include <cstdint>
#include <vector>

#include "pcan/numerics.hpp"
#include "pcan/taxonomy.hpp"

namespace pcan {

enum class Level { body, action };

/// EMA-maintained class centroids at both hierarchy levels. Prototypes are
/// updated only through ema_update (confident samples) plus, optionally, the
/// trainer's diversity-gradient adjustment; no loss backpropagates into them.
struct PrototypeBank {
    Mat p_body;    // N_B x d
    Mat p_action;  // N_A x d
    double rho = 0.9;
    std::uint64_t init_seed = 0;
    std::vector<std::uint64_t> update_counts_body;
    std::vector<std::uint64_t> update_counts_action;

    std::size_t dim() const { return p_body.cols; }
};

/// Rows drawn i.i.d. N(0, 1/d) and L2-normalized; deterministic per seed
/// (body rows drawn first, then action rows, coordinate-major).
PrototypeBank init_bank(const ActionTree& tree, std::size_t d, std::uint64_t seed, double rho = 0.9);

/// p_k <- (1 - rho) * mean(confident_feats) + rho * p_k. Throws
/// contract_error on an empty list: the caller skips classes with no
/// confident samples in the batch.
void ema_update(PrototypeBank& bank, Level level, int k, const std::vector<const double*>& confident_feats);
void ema_update(PrototypeBank& bank, Level level, int k, const std::vector<Vec>& confident_feats);

struct PdaResult {
    double value = 0.0;
    Mat grad;  // same shape as the prototype matrix
};

/// Diversity amplification over a prototype matrix:
///   L = sqrt( sum_i sum_j cos(p_i, p_j) ),
/// diagonal included, so the radicand equals ||sum_i p_i/||p_i||||^2 and is
/// never negative. Gradient is with respect to every row. Throws
/// degenerate_input_error if any row norm is <= 1e-12.
PdaResult pda_loss(const Mat& prototypes);

} // namespace pcan
