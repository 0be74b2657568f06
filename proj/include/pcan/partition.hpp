#pragma once

#include <vector>

#include "pcan/numerics.hpp"
#include "pcan/taxonomy.hpp"

namespace pcan {

/// Per-batch classifier outputs at both levels. Rows index samples; preds are
/// the argmaxes of their logits and prob rows are softmaxes of the same.
struct BatchPredictions {
    Mat body_logits;    // batch x N_B
    Mat action_logits;  // batch x N_A (post-rectification)
    Mat body_probs;
    Mat action_probs;
    std::vector<int> body_pred;
    std::vector<int> action_pred;

    std::size_t batch_size() const { return body_pred.size(); }
};

// Recomputes preds and probs from the logits, keeping the struct invariants.
void finalize_predictions(BatchPredictions& preds);

/// Confident and ambiguous index sets for one batch, keyed by class.
/// FN sets are keyed by the TRUE class (they calibrate toward the correct
/// prototype); FP sets by the PREDICTED class (they repel from the wrongly
/// claimed prototype).
///
/// Action-level subtype table per sample, given (body correct?, action correct?):
///   both correct            -> tp_a[true action]
///   body correct, action no -> fn_a1[true action]
///   both wrong              -> fn_a2[true action]
///   body wrong, action ok   -> fn_a3[true action]
/// and every action-wrong sample additionally lands in fp_a[predicted action].
struct SamplePartition {
    std::vector<std::vector<int>> tp_b, fn_b, fp_b;              // size N_B
    std::vector<std::vector<int>> tp_a, fn_a1, fn_a2, fn_a3, fp_a;  // size N_A
};

SamplePartition partition_batch(const ActionTree& tree, const std::vector<LabelPair>& gt,
                                const BatchPredictions& preds);

} // namespace pcan
