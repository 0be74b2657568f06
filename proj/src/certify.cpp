#include "pcan/certify.hpp"

#include <algorithm>

#include "pcan/losses.hpp"
#include "pcan/model.hpp"
#include "pcan/numerics.hpp"
#include "pcan/partition.hpp"
#include "pcan/prototype.hpp"
#include "pcan/taxonomy.hpp"

namespace pcan {

namespace {

Mat random_mat(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
    Mat m(rows, cols);
    for (double& v : m.data) v = rng.normal() * scale;
    return m;
}

std::vector<int> random_labels(std::size_t n, int n_class, Rng& rng) {
    std::vector<int> gt(n);
    for (int& g : gt) g = static_cast<int>(rng.below(n_class));
    return gt;
}

double check_ce(int seed, double h) {
    Rng rng(900 + seed);
    const std::size_t batch = 4, n = 6;
    const Mat logits = random_mat(batch, n, rng);
    const std::vector<int> gt = random_labels(batch, static_cast<int>(n), rng);
    const CeResult res = ce_loss(logits, gt);
    const auto f = [&](const Vec& x) {
        Mat m(batch, n);
        m.data = x;
        return ce_loss(m, gt).value;
    };
    return grad_check(f, logits.data, res.grad_logits.data, h).max_rel_error;
}

double check_hp(int seed, HpMode mode, double h) {
    Rng rng(1700 + seed);
    const ActionTree tree = make_even_tree(3, 7);
    const std::size_t batch = 4;
    const std::size_t nb = 3, na = 7;
    const Mat body = random_mat(batch, nb, rng);
    const Mat action = random_mat(batch, na, rng);
    const std::vector<int> gt = random_labels(batch, tree.n_action, rng);
    const double lambda = 0.5 + rng.uniform();
    const HpResult res = hp_loss(tree, body, action, gt, lambda, mode);

    Vec x0 = body.data;
    x0.insert(x0.end(), action.data.begin(), action.data.end());
    Vec analytic = res.grad_body.data;
    analytic.insert(analytic.end(), res.grad_action.data.begin(), res.grad_action.data.end());
    const auto f = [&](const Vec& x) {
        Mat b(batch, nb), a(batch, na);
        std::copy(x.begin(), x.begin() + b.data.size(), b.data.begin());
        std::copy(x.begin() + b.data.size(), x.end(), a.data.begin());
        return hp_loss(tree, b, a, gt, lambda, mode).value;
    };
    return grad_check(f, x0, analytic, h).max_rel_error;
}

double check_pcc(int seed, Level level, FpSign sign, double h) {
    Rng rng(2600 + seed);
    const ActionTree tree = make_even_tree(2, 5);
    const std::size_t batch = 8, d = 10;
    const Mat feats = random_mat(batch, d, rng);
    const PrototypeBank bank = init_bank(tree, d, 77 + seed, 0.9);

    BatchPredictions preds;
    preds.body_logits = random_mat(batch, 2, rng);
    preds.action_logits = random_mat(batch, 5, rng);
    finalize_predictions(preds);
    std::vector<LabelPair> gt;
    for (std::size_t i = 0; i < batch; ++i) {
        const int action = static_cast<int>(rng.below(tree.n_action));
        gt.push_back({tree.parent[action], action});
    }
    const SamplePartition part = partition_batch(tree, gt, preds);

    HyperParams hp;
    hp.fp_sign = sign;
    const Mat& probs = level == Level::body ? preds.body_probs : preds.action_probs;
    const PccResult res = pcc_loss(feats, part, bank, probs, hp, level);
    const auto f = [&](const Vec& x) {
        Mat m(batch, d);
        m.data = x;
        return pcc_value_frozen(m, part, bank, probs, hp, level, res.inter);
    };
    return grad_check(f, feats.data, res.grad_feats.data, h).max_rel_error;
}

double check_pda(int seed, double h) {
    Rng rng(3500 + seed);
    const Mat protos = random_mat(6, 8, rng);
    const PdaResult res = pda_loss(protos);
    const auto f = [&](const Vec& x) {
        Mat m(6, 8);
        m.data = x;
        return pda_loss(m).value;
    };
    return grad_check(f, protos.data, res.grad.data, h).max_rel_error;
}

double check_forward(int seed, double h) {
    Rng rng(4400 + seed);
    const ActionTree tree = make_even_tree(2, 5);
    const std::size_t batch = 3, d = 7;
    StreamHead head = init_head(tree, d, 0.7, rng);
    const PrototypeBank bank = init_bank(tree, d, 55 + seed, 0.9);
    const Mat feats = random_mat(batch, d, rng);
    const std::vector<int> gt_action = random_labels(batch, tree.n_action, rng);
    const double lambda = 1.0;

    const auto objective = [&](const StreamHead& hd, HeadGrads* grads) {
        ForwardCache cache;
        const BatchPredictions preds = forward(hd, bank, feats, &cache);
        const CeResult ce = ce_loss(preds.action_logits, gt_action);
        const HpResult hp =
            hp_loss(tree, preds.body_logits, preds.action_logits, gt_action, lambda, HpMode::tree);
        if (grads) {
            Mat d_action = ce.grad_logits;
            for (std::size_t i = 0; i < d_action.data.size(); ++i) {
                d_action.data[i] += hp.grad_action.data[i];
            }
            backward(hd, bank, feats, cache, hp.grad_body, d_action, *grads);
        }
        return ce.value + hp.value;
    };

    HeadGrads grads = make_grads_like(head);
    objective(head, &grads);
    const auto f = [&](const Vec& x) {
        StreamHead hd = head;
        set_params(hd, x);
        return objective(hd, nullptr);
    };
    return grad_check(f, flatten_params(head), flatten_grads(grads), h).max_rel_error;
}

} // namespace

CertificationReport run_gradient_certification(int seeds, double tolerance, double h) {
    struct Entry {
        const char* name;
        double (*run)(int, double);
    };
    const auto hp_tree = [](int s, double hh) { return check_hp(s, HpMode::tree, hh); };
    const auto hp_concat = [](int s, double hh) { return check_hp(s, HpMode::concat, hh); };
    const auto pcc_bp = [](int s, double hh) { return check_pcc(s, Level::body, FpSign::paper, hh); };
    const auto pcc_br = [](int s, double hh) { return check_pcc(s, Level::body, FpSign::repel, hh); };
    const auto pcc_ap = [](int s, double hh) { return check_pcc(s, Level::action, FpSign::paper, hh); };
    const auto pcc_ar = [](int s, double hh) { return check_pcc(s, Level::action, FpSign::repel, hh); };
    const Entry entries[] = {
        {"ce", check_ce},
        {"hp_tree", hp_tree},
        {"hp_concat", hp_concat},
        {"pcc_body_paper", pcc_bp},
        {"pcc_body_repel", pcc_br},
        {"pcc_action_paper", pcc_ap},
        {"pcc_action_repel", pcc_ar},
        {"pda", check_pda},
        {"forward_rectified", check_forward},
    };

    CertificationReport report;
    for (const Entry& entry : entries) {
        CertificationCase c;
        c.name = entry.name;
        c.tolerance = tolerance;
        for (int s = 0; s < seeds; ++s) c.max_rel_error = std::max(c.max_rel_error, entry.run(s, h));
        c.passed = c.max_rel_error < tolerance;
        report.all_passed = report.all_passed && c.passed;
        report.cases.push_back(std::move(c));
    }
    return report;
}

} // namespace pcan
