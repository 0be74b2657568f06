#include "pcan/losses.hpp"

#include <cmath>

#include "pcan/common.hpp"

namespace pcan {

void HyperParams::validate() const {
    if (!(tau > 0.0)) throw contract_error("HyperParams: tau must be > 0");
    if (rho < 0.0 || rho >= 1.0) throw contract_error("HyperParams: rho must be in [0, 1)");
    for (double a : alpha) {
        if (a < 0.0) throw contract_error("HyperParams: alpha components must be >= 0");
    }
    if (beta < 0.0) throw contract_error("HyperParams: beta must be >= 0");
    if (gamma_a < 0.0 || gamma_b < 0.0) throw contract_error("HyperParams: gamma must be >= 0");
}

CeResult ce_loss(const Mat& action_logits, const std::vector<int>& gt_action) {
    const std::size_t batch = action_logits.rows;
    const std::size_t n = action_logits.cols;
    if (gt_action.size() != batch) throw contract_error("ce_loss: gt length mismatch");

    CeResult result;
    result.grad_logits = Mat(batch, n);
    const double inv_b = 1.0 / static_cast<double>(batch);
    Vec probs(n);
    for (std::size_t i = 0; i < batch; ++i) {
        const int gt = gt_action[i];
        if (gt < 0 || static_cast<std::size_t>(gt) >= n) throw contract_error("ce_loss: gt class out of range");
        softmax_inplace(action_logits.row(i), probs.data(), n);
        result.value += -std::log(probs[gt]) * inv_b;
        double* g = result.grad_logits.row(i);
        for (std::size_t k = 0; k < n; ++k) g[k] = probs[k] * inv_b;
        g[gt] -= inv_b;
    }
    return result;
}

HpResult hp_loss(const ActionTree& tree, const Mat& body_logits, const Mat& action_logits,
                 const std::vector<int>& gt_action, double lambda, HpMode mode) {
    const std::size_t batch = body_logits.rows;
    const std::size_t nb = body_logits.cols;
    const std::size_t na = action_logits.cols;
    if (action_logits.rows != batch || gt_action.size() != batch) {
        throw contract_error("hp_loss: batch length mismatch");
    }
    if (nb != static_cast<std::size_t>(tree.n_body) || na != static_cast<std::size_t>(tree.n_action)) {
        throw contract_error("hp_loss: logit widths do not match tree");
    }

    HpResult result;
    result.grad_body = Mat(batch, nb);
    result.grad_action = Mat(batch, na);
    const double inv_b = 1.0 / static_cast<double>(batch);

    Vec joint(nb + na);
    Vec probs(nb + na);
    for (std::size_t i = 0; i < batch; ++i) {
        const int gt = gt_action[i];
        if (gt < 0 || static_cast<std::size_t>(gt) >= na) throw contract_error("hp_loss: gt class out of range");
        const double* qb = body_logits.row(i);
        const double* qa = action_logits.row(i);
        for (std::size_t b = 0; b < nb; ++b) joint[b] = lambda * qb[b];
        for (std::size_t a = 0; a < na; ++a) {
            joint[nb + a] = qa[a];
            if (mode == HpMode::tree) joint[nb + a] += lambda * qb[tree.parent[a]];
        }
        softmax_inplace(joint.data(), probs.data(), nb + na);
        result.value += -std::log(probs[nb + gt]) * inv_b;

        // d loss / d joint = (softmax - onehot) / batch, then chain into the
        // two logit vectors through the joint construction.
        double* gb = result.grad_body.row(i);
        double* ga = result.grad_action.row(i);
        for (std::size_t b = 0; b < nb; ++b) gb[b] = lambda * probs[b] * inv_b;
        for (std::size_t a = 0; a < na; ++a) {
            double gj = probs[nb + a] * inv_b;
            if (a == static_cast<std::size_t>(gt)) gj -= inv_b;
            ga[a] = gj;
            if (mode == HpMode::tree) gb[tree.parent[a]] += lambda * gj;
        }
    }
    return result;
}

namespace {

struct SetFamily {
    const std::vector<std::vector<int>>* sets = nullptr;
    int omega = -1;     // FN subtype index, or -1 for the FP family
    double weight = 1.0;
    bool is_fn = true;
};

Vec mean_of(const Mat& feats, const std::vector<int>& idx) {
    Vec mu(feats.cols, 0.0);
    for (int i : idx) {
        const double* f = feats.row(i);
        for (std::size_t c = 0; c < feats.cols; ++c) mu[c] += f[c];
    }
    const double inv = 1.0 / static_cast<double>(idx.size());
    for (double& v : mu) v *= inv;
    return mu;
}

// Shared evaluator for pcc_loss and its frozen-mean view. When `grad` is
// null only the value is accumulated; when `frozen` is set its means are used
// instead of recomputing them from `feats`.
double pcc_eval(const Mat& feats, const SamplePartition& part, const PrototypeBank& bank,
                const Mat& probs, const HyperParams& hp, Level level,
                const CalibrationIntermediates* frozen, Mat* grad,
                CalibrationIntermediates* record) {
    const Mat& protos = level == Level::body ? bank.p_body : bank.p_action;
    const std::size_t n_class = protos.rows;
    const std::size_t d = feats.cols;
    const std::size_t batch = feats.rows;
    if (probs.rows != batch || probs.cols != n_class) {
        throw contract_error("pcc_loss: probs shape does not match batch / level");
    }
    if (protos.cols != d) throw contract_error("pcc_loss: bank dimension does not match features");

    std::vector<SetFamily> families;
    if (level == Level::action) {
        families.push_back({&part.fn_a1, 0, hp.alpha[0], true});
        families.push_back({&part.fn_a2, 1, hp.alpha[1], true});
        families.push_back({&part.fn_a3, 2, hp.alpha[2], true});
        families.push_back({&part.fp_a, -1, 1.0, false});
    } else {
        families.push_back({&part.fn_b, 0, 1.0, true});
        families.push_back({&part.fp_b, -1, 1.0, false});
    }

    if (record) {
        record->psi.assign(batch, 0.0);
        record->big_psi.assign(batch, 0.0);
        record->z_fn.assign(batch, 0.0);
        record->z_fp.assign(batch, 0.0);
    }

    const double fp_sign = hp.fp_sign == FpSign::paper ? 1.0 : -1.0;
    double loss = 0.0;
    Vec cos_protos(n_class);
    Vec exps(n_class);
    Vec cgrad(d);

    for (const SetFamily& fam : families) {
        if (fam.sets->size() != n_class) throw contract_error("pcc_loss: partition does not match level");
        for (std::size_t k = 0; k < n_class; ++k) {
            const std::vector<int>& members = (*fam.sets)[k];
            if (members.empty()) continue;

            Vec mu;
            if (frozen) {
                const auto key_i = static_cast<int>(k);
                if (fam.is_fn) {
                    mu = frozen->mu_fn.at({fam.omega, key_i});
                } else {
                    mu = frozen->mu_fp.at(key_i);
                }
            } else {
                mu = mean_of(feats, members);
            }
            if (record) {
                if (fam.is_fn) {
                    record->mu_fn[{fam.omega, static_cast<int>(k)}] = mu;
                } else {
                    record->mu_fp[static_cast<int>(k)] = mu;
                }
            }

            for (int i : members) {
                const double* f = feats.row(i);
                const double q = probs(i, k);
                const double c_mu = cos_sim_or_zero(f, mu.data(), d);
                const double aux = fam.is_fn ? 1.0 - c_mu : 1.0 + c_mu;
                const double sign = fam.is_fn ? 1.0 : fp_sign;

                for (std::size_t l = 0; l < n_class; ++l) {
                    cos_protos[l] = cos_sim_or_zero(f, protos.row(l), d);
                }
                const double z = sign * (hp.tau * cos_protos[k] - (1.0 - q) * aux);

                // log denominator over {z} U {tau * cos(F_i, p_l) : l != k}
                double m = z;
                for (std::size_t l = 0; l < n_class; ++l) {
                    if (l != k) m = std::max(m, hp.tau * cos_protos[l]);
                }
                double denom = std::exp(z - m);
                for (std::size_t l = 0; l < n_class; ++l) {
                    exps[l] = l == k ? 0.0 : std::exp(hp.tau * cos_protos[l] - m);
                    denom += exps[l];
                }
                const double log_denom = m + std::log(denom);
                loss += fam.weight * (-z + log_denom);

                if (record) {
                    if (fam.is_fn) {
                        record->psi[i] = aux;
                        record->z_fn[i] = z;
                    } else {
                        record->big_psi[i] = aux;
                        record->z_fp[i] = z;
                    }
                }

                if (grad) {
                    const double soft_z = std::exp(z - log_denom);
                    const double dz = fam.weight * (soft_z - 1.0);
                    // z = sign * (tau * c_k - (1 - q) * aux); aux depends on
                    // c_mu with slope -1 (FN) / +1 (FP).
                    const double daux_dcmu = fam.is_fn ? -1.0 : 1.0;
                    const double g_ck = dz * sign * hp.tau;
                    const double g_cmu = dz * sign * (-(1.0 - q)) * daux_dcmu;

                    double* gi = grad->row(i);
                    cos_sim_grad_wrt_a(f, protos.row(k), d, cgrad.data());
                    for (std::size_t c = 0; c < d; ++c) gi[c] += g_ck * cgrad[c];
                    cos_sim_grad_wrt_a(f, mu.data(), d, cgrad.data());
                    for (std::size_t c = 0; c < d; ++c) gi[c] += g_cmu * cgrad[c];
                    for (std::size_t l = 0; l < n_class; ++l) {
                        if (l == k) continue;
                        const double g_cl = fam.weight * hp.tau * (exps[l] / denom);
                        cos_sim_grad_wrt_a(f, protos.row(l), d, cgrad.data());
                        for (std::size_t c = 0; c < d; ++c) gi[c] += g_cl * cgrad[c];
                    }
                }
            }
        }
    }
    return loss;
}

} // namespace

PccResult pcc_loss(const Mat& feats, const SamplePartition& part, const PrototypeBank& bank,
                   const Mat& probs, const HyperParams& hp, Level level) {
    PccResult result;
    result.grad_feats = Mat(feats.rows, feats.cols);
    result.value = pcc_eval(feats, part, bank, probs, hp, level, nullptr, &result.grad_feats,
                            &result.inter);
    return result;
}

double pcc_value_frozen(const Mat& feats, const SamplePartition& part, const PrototypeBank& bank,
                        const Mat& probs, const HyperParams& hp, Level level,
                        const CalibrationIntermediates& frozen) {
    return pcc_eval(feats, part, bank, probs, hp, level, &frozen, nullptr, nullptr);
}

double total_loss(double ce, double hp_term, double pcc, double pda, const HyperParams& hp) {
    return ce + hp_term + pcc + hp.beta * pda;
}

} // namespace pcan
