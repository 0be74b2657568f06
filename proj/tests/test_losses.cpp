#include <cmath>

#include "doctest.h"

#include "pcan/common.hpp"
#include "pcan/losses.hpp"

using namespace pcan;

namespace {

// Empty partition shell with every per-class list present.
SamplePartition empty_partition(const ActionTree& tree) {
    SamplePartition part;
    part.tp_b.resize(tree.n_body);
    part.fn_b.resize(tree.n_body);
    part.fp_b.resize(tree.n_body);
    part.tp_a.resize(tree.n_action);
    part.fn_a1.resize(tree.n_action);
    part.fn_a2.resize(tree.n_action);
    part.fn_a3.resize(tree.n_action);
    part.fp_a.resize(tree.n_action);
    return part;
}

PrototypeBank two_action_bank() {
    const ActionTree tree = make_even_tree(1, 2);
    PrototypeBank bank = init_bank(tree, 3, 0);
    bank.p_action(0, 0) = 1.0; bank.p_action(0, 1) = 0.0; bank.p_action(0, 2) = 0.0;
    bank.p_action(1, 0) = 0.0; bank.p_action(1, 1) = 1.0; bank.p_action(1, 2) = 0.0;
    return bank;
}

} // namespace

TEST_SUITE("losses") {

TEST_CASE("hyperparameter validation") {
    HyperParams hp;
    CHECK_NOTHROW(hp.validate());
    hp.tau = 0.0;
    CHECK_THROWS_AS(hp.validate(), contract_error);
    hp = HyperParams{};
    hp.rho = 1.0;
    CHECK_THROWS_AS(hp.validate(), contract_error);
    hp = HyperParams{};
    hp.alpha[1] = -0.1;
    CHECK_THROWS_AS(hp.validate(), contract_error);
    hp = HyperParams{};
    hp.lambda = 0.0;  // sweepable down to zero
    CHECK_NOTHROW(hp.validate());
}

TEST_CASE("cross entropy on uniform logits is log of the class count") {
    Mat logits(1, 52);
    const CeResult res = ce_loss(logits, {7});
    CHECK(res.value == doctest::Approx(std::log(52.0)).epsilon(1e-14));
}

TEST_CASE("cross entropy vanishes for a dominant correct logit") {
    Mat logits(1, 10);
    logits(0, 3) = 60.0;
    const CeResult res = ce_loss(logits, {3});
    CHECK(res.value >= 0.0);
    CHECK(res.value < 1e-12);
}

TEST_CASE("cross entropy golden batch") {
    Mat logits(2, 4);
    const double z1[4] = {0.3, -1.2, 2.5, 0.7};
    const double z2[4] = {-0.5, 0.1, 0.0, 1.9};
    for (int k = 0; k < 4; ++k) { logits(0, k) = z1[k]; logits(1, k) = z2[k]; }
    const std::vector<int> gt{2, 0};

    const CeResult res = ce_loss(logits, gt);
    CHECK(std::abs(res.value - 1.5017265165612362323) < 1e-12);

    // each gradient row sums to zero
    for (std::size_t i = 0; i < 2; ++i) {
        double s = 0.0;
        for (int k = 0; k < 4; ++k) s += res.grad_logits(i, k);
        CHECK(std::abs(s) < 1e-15);
    }

    auto f = [&](const Vec& x) {
        Mat m(2, 4);
        m.data = x;
        return ce_loss(m, gt).value;
    };
    CHECK(grad_check(f, logits.data, res.grad_logits.data).max_rel_error < 1e-6);
}

TEST_CASE("cross entropy rejects bad ground truth") {
    Mat logits(2, 4);
    CHECK_THROWS_AS((void)ce_loss(logits, {0}), contract_error);
    CHECK_THROWS_AS((void)ce_loss(logits, {0, 4}), contract_error);
}

TEST_CASE("joint hierarchy loss on an all-zero 1/1 tree is log 2") {
    const ActionTree tree = make_even_tree(1, 1);
    Mat qb(1, 1);
    Mat qa(1, 1);
    const HpResult res = hp_loss(tree, qb, qa, {0}, 1.0);
    CHECK(res.value == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    CHECK(res.grad_action(0, 0) == doctest::Approx(-0.5).epsilon(1e-14));
}

TEST_CASE("joint hierarchy loss golden batch") {
    const ActionTree tree{2, 3, {0, 0, 1}, {}, {}};
    Mat qb(2, 2);
    Mat qa(2, 3);
    qb(0, 0) = 0.5;  qb(0, 1) = -0.3;
    qa(0, 0) = 1.2;  qa(0, 1) = -0.7;  qa(0, 2) = 0.4;
    qb(1, 0) = -1.1; qb(1, 1) = 0.8;
    qa(1, 0) = 0.0;  qa(1, 1) = 0.3;   qa(1, 2) = -0.2;
    const std::vector<int> gt{2, 0};

    CHECK(std::abs(hp_loss(tree, qb, qa, gt, 1.0).value - 2.4612801753612898279) < 1e-12);
    CHECK(std::abs(hp_loss(tree, qb, qa, gt, 0.7).value - 2.1579885695532246631) < 1e-12);
    CHECK(std::abs(hp_loss(tree, qb, qa, gt, 1.0, HpMode::concat).value - 1.6930806452549667446) <
          1e-12);

    // gradients against finite differences through both logit blocks
    for (const HpMode mode : {HpMode::tree, HpMode::concat}) {
        const HpResult res = hp_loss(tree, qb, qa, gt, 0.7, mode);
        Vec x0 = qb.data;
        x0.insert(x0.end(), qa.data.begin(), qa.data.end());
        Vec analytic = res.grad_body.data;
        analytic.insert(analytic.end(), res.grad_action.data.begin(), res.grad_action.data.end());
        auto f = [&](const Vec& x) {
            Mat mb(2, 2);
            Mat ma(2, 3);
            std::copy(x.begin(), x.begin() + 4, mb.data.begin());
            std::copy(x.begin() + 4, x.end(), ma.data.begin());
            return hp_loss(tree, mb, ma, gt, 0.7, mode).value;
        };
        CHECK(grad_check(f, x0, analytic).max_rel_error < 1e-6);
    }
}

TEST_CASE("lambda zero decouples the body logits") {
    const ActionTree tree = make_even_tree(2, 4);
    Mat qb(3, 2);
    Mat qa(3, 4);
    Rng rng(31);
    for (double& v : qb.data) v = rng.normal();
    for (double& v : qa.data) v = rng.normal();
    const std::vector<int> gt{0, 3, 1};

    const HpResult tree_res = hp_loss(tree, qb, qa, gt, 0.0, HpMode::tree);
    const HpResult cat_res = hp_loss(tree, qb, qa, gt, 0.0, HpMode::concat);
    CHECK(tree_res.value == cat_res.value);
    CHECK(tree_res.grad_body.data == Vec(6, 0.0));
    CHECK(cat_res.grad_body.data == Vec(6, 0.0));
}

TEST_CASE("a parent-inconsistent action argmax costs more than plain cross entropy") {
    const ActionTree tree = make_even_tree(2, 4);  // parents 0,0,1,1
    Mat qb(1, 2);
    Mat qa(1, 4);
    qb(0, 1) = 2.0;   // body head backs body 1
    qa(0, 2) = 1.0;   // action head argmax is action 2 (child of body 1)
    const std::vector<int> gt{0};  // truth is action 0, child of body 0

    const double joint = hp_loss(tree, qb, qa, gt, 1.0).value;
    const double plain = ce_loss(qa, gt).value;
    CHECK(joint > plain);

    // flipping the body head to the true parent softens the penalty
    Mat qb_ok(1, 2);
    qb_ok(0, 0) = 2.0;
    CHECK(hp_loss(tree, qb_ok, qa, gt, 1.0).value < plain);
}

TEST_CASE("calibration loss golden: one sample, wrong action, right body") {
    const ActionTree tree = make_even_tree(1, 2);
    const PrototypeBank bank = two_action_bank();
    Mat feats(1, 3);
    feats(0, 0) = 0.2; feats(0, 1) = -0.4; feats(0, 2) = 0.9;
    Mat probs(1, 2);
    probs(0, 0) = 0.3; probs(0, 1) = 0.7;

    SamplePartition part = empty_partition(tree);
    part.tp_b[0] = {0};
    part.fn_a1[0] = {0};  // true action 0 missed
    part.fp_a[1] = {0};   // action 1 claimed

    HyperParams hp;
    const PccResult res = pcc_loss(feats, part, bank, probs, hp, Level::action);
    CHECK(std::abs(res.value - 1.7428335011991733312) < 1e-12);

    hp.fp_sign = FpSign::repel;
    const PccResult rep = pcc_loss(feats, part, bank, probs, hp, Level::action);
    CHECK(std::abs(rep.value - 1.0852732243172237845) < 1e-12);

    // singleton sets: the mean is the feature itself
    CHECK(res.inter.mu_fn.at({0, 0}) == feats.row_vec(0));
    CHECK(res.inter.mu_fp.at(1) == feats.row_vec(0));
    CHECK(std::abs(res.inter.psi[0] - 0.0) < 1e-14);
    CHECK(std::abs(res.inter.big_psi[0] - 2.0) < 1e-14);
    const double c0 = cos_sim(feats.row(0), bank.p_action.row(0), 3);
    const double c1 = cos_sim(feats.row(0), bank.p_action.row(1), 3);
    CHECK(std::abs(res.inter.z_fn[0] - (0.125 * c0 - 0.7 * res.inter.psi[0])) < 1e-12);
    CHECK(std::abs(res.inter.z_fp[0] - (0.125 * c1 - 0.3 * res.inter.big_psi[0])) < 1e-12);
}

TEST_CASE("calibration loss splits into its two golden terms") {
    const ActionTree tree = make_even_tree(1, 2);
    const PrototypeBank bank = two_action_bank();
    Mat feats(1, 3);
    feats(0, 0) = 0.2; feats(0, 1) = -0.4; feats(0, 2) = 0.9;
    Mat probs(1, 2);
    probs(0, 0) = 0.3; probs(0, 1) = 0.7;
    const HyperParams hp;

    SamplePartition fn_only = empty_partition(tree);
    fn_only.fn_a1[0] = {0};
    CHECK(std::abs(pcc_loss(feats, fn_only, bank, probs, hp, Level::action).value -
                   0.65652928780555175635) < 1e-12);

    SamplePartition fp_only = empty_partition(tree);
    fp_only.fp_a[1] = {0};
    CHECK(std::abs(pcc_loss(feats, fp_only, bank, probs, hp, Level::action).value -
                   1.0863042133936215748) < 1e-12);
}

TEST_CASE("no misclassified samples means zero calibration loss") {
    const ActionTree tree = make_even_tree(2, 4);
    const PrototypeBank bank = init_bank(tree, 5, 3);
    Mat feats(3, 5);
    Rng rng(8);
    for (double& v : feats.data) v = rng.normal();
    Mat probs(3, 4, 0.25);
    SamplePartition part = empty_partition(tree);
    part.tp_a[0] = {0, 1};
    part.tp_a[3] = {2};

    const PccResult res = pcc_loss(feats, part, bank, probs, HyperParams{}, Level::action);
    CHECK(res.value == 0.0);
    CHECK(res.grad_feats.data == Vec(15, 0.0));
}

TEST_CASE("descending the calibration gradient moves a missed feature toward its prototype") {
    const ActionTree tree = make_even_tree(1, 3);
    PrototypeBank bank = init_bank(tree, 3, 1);
    bank.p_action(0, 0) = 0.6; bank.p_action(0, 1) = 0.8;  bank.p_action(0, 2) = 0.0;
    bank.p_action(1, 0) = 0.6; bank.p_action(1, 1) = -0.8; bank.p_action(1, 2) = 0.0;
    bank.p_action(2, 0) = 0.8; bank.p_action(2, 1) = 0.0;  bank.p_action(2, 2) = 0.6;
    Mat feats(1, 3);
    feats(0, 0) = 1.0;
    Mat probs(1, 3);
    probs(0, 0) = 0.2; probs(0, 1) = 0.5; probs(0, 2) = 0.3;

    SamplePartition part = empty_partition(tree);
    part.fn_a1[0] = {0};  // true class 0 only; no FP membership

    const PccResult res = pcc_loss(feats, part, bank, probs, HyperParams{}, Level::action);

    // project (p_0 - F) onto the plane orthogonal to F and compare with the
    // descent direction; cosine pulls can only act inside that plane
    Vec v(3), f_hat(3);
    const double fn = norm(feats.row(0), 3);
    for (int c = 0; c < 3; ++c) f_hat[c] = feats(0, c) / fn;
    for (int c = 0; c < 3; ++c) v[c] = bank.p_action(0, c) - feats(0, c);
    const double along = dot(v.data(), f_hat.data(), 3);
    Vec v_perp(3);
    for (int c = 0; c < 3; ++c) v_perp[c] = v[c] - along * f_hat[c];

    double agreement = 0.0;
    for (int c = 0; c < 3; ++c) agreement += -res.grad_feats(0, c) * v_perp[c];
    CHECK(agreement > 0.0);
}

TEST_CASE("calibration gradient matches finite differences with frozen means") {
    const ActionTree tree = make_even_tree(2, 5);
    for (const FpSign sign : {FpSign::paper, FpSign::repel}) {
        for (const Level level : {Level::action, Level::body}) {
            Rng rng(sign == FpSign::paper ? 640 : 641);
            const std::size_t batch = 12;
            const std::size_t d = 8;
            const PrototypeBank bank = init_bank(tree, d, 90 + rng.below(100));

            BatchPredictions preds;
            preds.body_logits = Mat(batch, 2);
            preds.action_logits = Mat(batch, 5);
            for (double& v : preds.body_logits.data) v = rng.normal();
            for (double& v : preds.action_logits.data) v = rng.normal();
            finalize_predictions(preds);
            std::vector<LabelPair> gt;
            for (std::size_t i = 0; i < batch; ++i) {
                const int a = static_cast<int>(rng.below(5));
                gt.push_back({tree.parent[a], a});
            }
            const SamplePartition part = partition_batch(tree, gt, preds);

            Mat feats(batch, d);
            for (double& v : feats.data) v = rng.normal();
            const Mat& probs = level == Level::action ? preds.action_probs : preds.body_probs;

            HyperParams hp;
            hp.fp_sign = sign;
            const PccResult res = pcc_loss(feats, part, bank, probs, hp, level);
            auto f = [&](const Vec& x) {
                Mat m(batch, d);
                m.data = x;
                return pcc_value_frozen(m, part, bank, probs, hp, level, res.inter);
            };
            CHECK(grad_check(f, feats.data, res.grad_feats.data).max_rel_error < 1e-4);
        }
    }
}

TEST_CASE("total loss is the weighted sum of its terms") {
    HyperParams hp;
    CHECK(total_loss(1.0, 2.0, 0.5, 1.0, hp) == 8.5);
    hp.beta = 0.0;
    CHECK(total_loss(1.0, 2.0, 0.5, 123.0, hp) == 3.5);
}

} // TEST_SUITE
