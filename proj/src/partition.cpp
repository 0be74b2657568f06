#include "pcan/partition.hpp"

#include "pcan/common.hpp"

namespace pcan {

void finalize_predictions(BatchPredictions& preds) {
    const std::size_t batch = preds.body_logits.rows;
    if (preds.action_logits.rows != batch) {
        throw contract_error("finalize_predictions: body/action batch mismatch");
    }
    preds.body_probs = Mat(batch, preds.body_logits.cols);
    preds.action_probs = Mat(batch, preds.action_logits.cols);
    preds.body_pred.resize(batch);
    preds.action_pred.resize(batch);
    for (std::size_t i = 0; i < batch; ++i) {
        softmax_inplace(preds.body_logits.row(i), preds.body_probs.row(i), preds.body_logits.cols);
        softmax_inplace(preds.action_logits.row(i), preds.action_probs.row(i), preds.action_logits.cols);
        preds.body_pred[i] = argmax(preds.body_logits.row(i), preds.body_logits.cols);
        preds.action_pred[i] = argmax(preds.action_logits.row(i), preds.action_logits.cols);
    }
}

SamplePartition partition_batch(const ActionTree& tree, const std::vector<LabelPair>& gt,
                                const BatchPredictions& preds) {
    const std::size_t batch = gt.size();
    if (preds.batch_size() != batch || preds.body_logits.rows != batch ||
        preds.action_logits.rows != batch) {
        throw contract_error("partition_batch: batch length mismatch between gt and predictions");
    }
    if (preds.body_logits.cols != static_cast<std::size_t>(tree.n_body) ||
        preds.action_logits.cols != static_cast<std::size_t>(tree.n_action)) {
        throw contract_error("partition_batch: logit widths do not match tree");
    }

    SamplePartition part;
    part.tp_b.resize(tree.n_body);
    part.fn_b.resize(tree.n_body);
    part.fp_b.resize(tree.n_body);
    part.tp_a.resize(tree.n_action);
    part.fn_a1.resize(tree.n_action);
    part.fn_a2.resize(tree.n_action);
    part.fn_a3.resize(tree.n_action);
    part.fp_a.resize(tree.n_action);

    for (std::size_t s = 0; s < batch; ++s) {
        const int i = static_cast<int>(s);
        if (!consistent(tree, gt[s])) {
            throw contract_error("partition_batch: ground-truth label pair inconsistent with tree at sample " +
                                 std::to_string(s));
        }
        const int tb = gt[s].body;
        const int ta = gt[s].action;
        const int pb = preds.body_pred[s];
        const int pa = preds.action_pred[s];
        const bool body_ok = pb == tb;
        const bool action_ok = pa == ta;

        // Body level is judged on the body classifier alone.
        if (body_ok) {
            part.tp_b[tb].push_back(i);
        } else {
            part.fn_b[tb].push_back(i);
            part.fp_b[pb].push_back(i);
        }

        // Action level uses the joint truth table.
        if (body_ok && action_ok) {
            part.tp_a[ta].push_back(i);
        } else if (body_ok) {
            part.fn_a1[ta].push_back(i);
        } else if (!action_ok) {
            part.fn_a2[ta].push_back(i);
        } else {
            part.fn_a3[ta].push_back(i);
        }
        if (!action_ok) part.fp_a[pa].push_back(i);
    }
    return part;
}

} // namespace pcan
