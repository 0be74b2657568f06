#pragma once

#include <array>
#include <map>
#include <utility>
#include <vector>

#include "pcan/partition.hpp"
#include "pcan/prototype.hpp"

namespace pcan {

enum class HpMode { tree, concat };
enum class FpSign { paper, repel };

struct HyperParams {
    double lambda = 1.0;                      // action-tree weight
    double rho = 0.9;                         // EMA momentum
    double tau = 0.125;                       // contrastive temperature
    std::array<double, 3> alpha{1.0, 0.5, 0.1};  // FN subtype weights
    double beta = 5.0;                        // diversity-loss weight
    double gamma_a = 1.0;                     // rectification weight, stream A
    double gamma_b = 5.0;                     // rectification weight, stream B
    FpSign fp_sign = FpSign::paper;

    void validate() const;  // throws contract_error on an out-of-range field
};

struct CeResult {
    double value = 0.0;
    Mat grad_logits;  // batch x N, (softmax - onehot) / batch
};

/// Mean cross-entropy over the batch at the action level.
CeResult ce_loss(const Mat& action_logits, const std::vector<int>& gt_action);

struct HpResult {
    double value = 0.0;
    Mat grad_body;
    Mat grad_action;
};

/// Hierarchical probabilistic loss over the joint vector q_J of length
/// N_B + N_A. In tree mode the parent body logit is added to each child
/// action entry:
///   q_J = [lambda * q_B  |  q_A + lambda * q_B[parent(.)]]
/// and the loss is -log softmax(q_J) at the ground-truth action entry,
/// averaged over the batch. concat mode drops the parent coupling and is the
/// pure concatenation used for the lambda ablation.
HpResult hp_loss(const ActionTree& tree, const Mat& body_logits, const Mat& action_logits,
                 const std::vector<int>& gt_action, double lambda, HpMode mode = HpMode::tree);

/// Batch statistics of the calibration loss. Means are exact arithmetic means
/// of their set's features and act as stop-gradient constants; psi / big_psi /
/// z entries are 0 for samples outside the corresponding sets.
struct CalibrationIntermediates {
    std::map<std::pair<int, int>, Vec> mu_fn;  // (omega, class) -> mean feature
    std::map<int, Vec> mu_fp;                  // class -> mean feature
    Vec psi;      // per sample, from its FN subtype set
    Vec big_psi;  // per sample, from the FP set
    Vec z_fn;     // per sample, Z_i^omega
    Vec z_fp;     // per sample, Z_i^FP
};

struct PccResult {
    double value = 0.0;
    Mat grad_feats;  // batch x d
    CalibrationIntermediates inter;
};

/// Prototype contrastive calibration. For each ambiguous sample the auxiliary
/// terms are
///   psi_i = 1 - cos(F_i, mu_fn)          (FN, pulled toward the true class)
///   Psi_i = 1 + cos(F_i, mu_fp)          (FP, regulated against the claimed class)
///   Z_i   = tau * cos(F_i, p_k) - (1 - q_ik) * psi_or_Psi
/// and the loss is the negative log of e^Z against the same-level prototype
/// negatives e^{tau * cos(F_i, p_l)}, l != k. FN subtype sums are weighted by
/// alpha; the FP sum has weight 1. fp_sign = repel negates the FP Z term.
/// level = body uses fn_b / fp_b / the body bank with a single FN subtype of
/// weight 1. Means, probabilities, and prototypes are gradient-free; the
/// gradient is with respect to the features only.
PccResult pcc_loss(const Mat& feats, const SamplePartition& part, const PrototypeBank& bank,
                   const Mat& probs, const HyperParams& hp, Level level);

/// Loss value only, with the means frozen to precomputed values. This is the
/// stop-gradient view of pcc_loss as a function of the features; the
/// finite-difference certification differentiates exactly this function.
double pcc_value_frozen(const Mat& feats, const SamplePartition& part, const PrototypeBank& bank,
                        const Mat& probs, const HyperParams& hp, Level level,
                        const CalibrationIntermediates& frozen);

/// L = ce + hp + pcc + beta * pda (pcc already summed over levels).
double total_loss(double ce, double hp_term, double pcc, double pda, const HyperParams& hp);

} // namespace pcan
