#include "pcan/model.hpp"

#include <cmath>
#include <cstring>

#include "pcan/common.hpp"

namespace pcan {

namespace {

void fill_gaussian(Mat& m, double scale, Rng& rng) {
    for (double& v : m.data) v = rng.normal() * scale;
}

} // namespace

StreamHead init_head(const ActionTree& tree, std::size_t d, double gamma, Rng& rng) {
    const auto nb = static_cast<std::size_t>(tree.n_body);
    const auto na = static_cast<std::size_t>(tree.n_action);
    StreamHead head;
    head.cls_b = Mat(nb, d);
    head.bias_b.assign(nb, 0.0);
    head.w1 = Mat(na, d);
    head.b1.assign(na, 0.0);
    head.w2 = Mat(d, d);
    head.b2.assign(d, 0.0);
    head.gamma = gamma;
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    fill_gaussian(head.cls_b, scale, rng);
    fill_gaussian(head.w1, scale, rng);
    fill_gaussian(head.w2, scale, rng);
    return head;
}

HeadGrads make_grads_like(const StreamHead& head) {
    HeadGrads g;
    g.cls_b = Mat(head.cls_b.rows, head.cls_b.cols);
    g.bias_b.assign(head.bias_b.size(), 0.0);
    g.w1 = Mat(head.w1.rows, head.w1.cols);
    g.b1.assign(head.b1.size(), 0.0);
    g.w2 = Mat(head.w2.rows, head.w2.cols);
    g.b2.assign(head.b2.size(), 0.0);
    return g;
}

std::vector<ParamView> param_views(StreamHead& head) {
    return {
        {head.cls_b.data.data(), head.cls_b.data.size(), true},
        {head.bias_b.data(), head.bias_b.size(), false},
        {head.w1.data.data(), head.w1.data.size(), true},
        {head.b1.data(), head.b1.size(), false},
        {head.w2.data.data(), head.w2.data.size(), true},
        {head.b2.data(), head.b2.size(), false},
    };
}

std::vector<ParamView> grad_views(HeadGrads& grads) {
    return {
        {grads.cls_b.data.data(), grads.cls_b.data.size(), true},
        {grads.bias_b.data(), grads.bias_b.size(), false},
        {grads.w1.data.data(), grads.w1.data.size(), true},
        {grads.b1.data(), grads.b1.size(), false},
        {grads.w2.data.data(), grads.w2.data.size(), true},
        {grads.b2.data(), grads.b2.size(), false},
    };
}

std::size_t param_count(const StreamHead& head) {
    return head.cls_b.data.size() + head.bias_b.size() + head.w1.data.size() + head.b1.size() +
           head.w2.data.size() + head.b2.size();
}

Vec flatten_params(const StreamHead& head) {
    Vec flat;
    flat.reserve(param_count(head));
    auto views = param_views(const_cast<StreamHead&>(head));
    for (const ParamView& v : views) flat.insert(flat.end(), v.data, v.data + v.size);
    return flat;
}

void set_params(StreamHead& head, const Vec& flat) {
    if (flat.size() != param_count(head)) throw contract_error("set_params: size mismatch");
    std::size_t off = 0;
    for (ParamView v : param_views(head)) {
        std::memcpy(v.data, flat.data() + off, v.size * sizeof(double));
        off += v.size;
    }
}

Vec flatten_grads(const HeadGrads& grads) {
    Vec flat;
    auto views = grad_views(const_cast<HeadGrads&>(grads));
    for (const ParamView& v : views) flat.insert(flat.end(), v.data, v.data + v.size);
    return flat;
}

BatchPredictions forward(const StreamHead& head, const PrototypeBank& bank, const Mat& feats,
                         ForwardCache* cache) {
    const std::size_t batch = feats.rows;
    const std::size_t d = feats.cols;
    const std::size_t nb = head.n_body();
    const std::size_t na = head.n_action();
    if (head.dim() != d) throw contract_error("forward: feature dimension does not match head");
    if (bank.p_action.rows != na || bank.p_action.cols != d) {
        throw contract_error("forward: prototype bank does not match head");
    }

    BatchPredictions preds;
    preds.body_logits = Mat(batch, nb);
    preds.action_logits = Mat(batch, na);
    if (cache) {
        cache->t = Mat(batch, d);
        cache->cos_tp = Mat(batch, na);
    }

    Vec t(d);
    for (std::size_t i = 0; i < batch; ++i) {
        const double* f = feats.row(i);
        for (std::size_t b = 0; b < nb; ++b) {
            preds.body_logits(i, b) = dot(head.cls_b.row(b), f, d) + head.bias_b[b];
        }
        for (std::size_t r = 0; r < d; ++r) t[r] = dot(head.w2.row(r), f, d) + head.b2[r];
        for (std::size_t k = 0; k < na; ++k) {
            bool degenerate = false;
            const double c = cos_sim_or_zero(t.data(), bank.p_action.row(k), d, &degenerate);
            if (degenerate) {
                diag::log(diag::LogLevel::debug, "forward: transformed vector has near-zero norm");
            }
            preds.action_logits(i, k) = dot(head.w1.row(k), f, d) + head.b1[k] + head.gamma * c;
            if (cache) cache->cos_tp(i, k) = c;
        }
        if (cache) std::memcpy(cache->t.row(i), t.data(), d * sizeof(double));
    }
    finalize_predictions(preds);
    return preds;
}

void backward(const StreamHead& head, const PrototypeBank& bank, const Mat& feats,
              const ForwardCache& cache, const Mat& d_body_logits, const Mat& d_action_logits,
              HeadGrads& out) {
    const std::size_t batch = feats.rows;
    const std::size_t d = feats.cols;
    const std::size_t nb = head.n_body();
    const std::size_t na = head.n_action();
    if (d_body_logits.rows != batch || d_body_logits.cols != nb || d_action_logits.rows != batch ||
        d_action_logits.cols != na || cache.t.rows != batch) {
        throw contract_error("backward: shape mismatch");
    }

    Vec g_t(d);
    Vec cgrad(d);
    for (std::size_t i = 0; i < batch; ++i) {
        const double* f = feats.row(i);
        const double* gb = d_body_logits.row(i);
        for (std::size_t b = 0; b < nb; ++b) {
            if (gb[b] == 0.0) continue;
            double* w = out.cls_b.row(b);
            for (std::size_t c = 0; c < d; ++c) w[c] += gb[b] * f[c];
            out.bias_b[b] += gb[b];
        }

        const double* ga = d_action_logits.row(i);
        const double* t = cache.t.row(i);
        std::fill(g_t.begin(), g_t.end(), 0.0);
        for (std::size_t k = 0; k < na; ++k) {
            if (ga[k] == 0.0) continue;
            double* w = out.w1.row(k);
            for (std::size_t c = 0; c < d; ++c) w[c] += ga[k] * f[c];
            out.b1[k] += ga[k];
            cos_sim_grad_wrt_a(t, bank.p_action.row(k), d, cgrad.data());
            const double coef = ga[k] * head.gamma;
            for (std::size_t c = 0; c < d; ++c) g_t[c] += coef * cgrad[c];
        }
        for (std::size_t r = 0; r < d; ++r) {
            if (g_t[r] == 0.0) continue;
            double* w = out.w2.row(r);
            for (std::size_t c = 0; c < d; ++c) w[c] += g_t[r] * f[c];
            out.b2[r] += g_t[r];
        }
    }
}

BatchPredictions fuse(const BatchPredictions& a, const BatchPredictions& b, Fusion mode) {
    if (!a.body_probs.same_shape(b.body_probs) || !a.action_probs.same_shape(b.action_probs)) {
        throw contract_error("fuse: stream shapes differ");
    }
    BatchPredictions fused;
    const std::size_t batch = a.batch_size();
    const std::size_t nb = a.body_probs.cols;
    const std::size_t na = a.action_probs.cols;
    fused.body_logits = Mat(batch, nb);
    fused.action_logits = Mat(batch, na);
    if (mode == Fusion::logit_sum) {
        for (std::size_t i = 0; i < fused.body_logits.data.size(); ++i) {
            fused.body_logits.data[i] = a.body_logits.data[i] + b.body_logits.data[i];
        }
        for (std::size_t i = 0; i < fused.action_logits.data.size(); ++i) {
            fused.action_logits.data[i] = a.action_logits.data[i] + b.action_logits.data[i];
        }
        finalize_predictions(fused);
        return fused;
    }
    // prob_mean: average probabilities, expose log-probabilities as logits so
    // downstream consumers keep a softmax-consistent view.
    fused.body_probs = Mat(batch, nb);
    fused.action_probs = Mat(batch, na);
    for (std::size_t i = 0; i < fused.body_probs.data.size(); ++i) {
        fused.body_probs.data[i] = 0.5 * (a.body_probs.data[i] + b.body_probs.data[i]);
        fused.body_logits.data[i] = std::log(fused.body_probs.data[i]);
    }
    for (std::size_t i = 0; i < fused.action_probs.data.size(); ++i) {
        fused.action_probs.data[i] = 0.5 * (a.action_probs.data[i] + b.action_probs.data[i]);
        fused.action_logits.data[i] = std::log(fused.action_probs.data[i]);
    }
    fused.body_pred.resize(batch);
    fused.action_pred.resize(batch);
    for (std::size_t i = 0; i < batch; ++i) {
        fused.body_pred[i] = static_cast<int>(argmax(fused.body_probs.row(i), nb));
        fused.action_pred[i] = static_cast<int>(argmax(fused.action_probs.row(i), na));
    }
    return fused;
}

} // namespace pcan
