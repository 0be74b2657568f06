#pragma once

#include <cstddef>
#include <vector>

#include "pcan/numerics.hpp"
#include "pcan/partition.hpp"
#include "pcan/prototype.hpp"
#include "pcan/taxonomy.hpp"

namespace pcan {

enum class Fusion { prob_mean, logit_sum };

// Trainable parameters of one stream. Weight matrices are stored row-major
// with one row per output unit, so cls_b is N_B x d, w1 is N_A x d and w2 is
// d x d. gamma is a fixed hyperparameter, not a trainable.
struct StreamHead {
    Mat cls_b;
    Vec bias_b;
    Mat w1;
    Vec b1;
    Mat w2;
    Vec b2;
    double gamma = 1.0;

    std::size_t dim() const { return w2.cols; }
    std::size_t n_body() const { return cls_b.rows; }
    std::size_t n_action() const { return w1.rows; }
    bool operator==(const StreamHead&) const = default;
};

// Gradient (or momentum) buffers shaped like the trainable part of a head.
struct HeadGrads {
    Mat cls_b;
    Vec bias_b;
    Mat w1;
    Vec b1;
    Mat w2;
    Vec b2;
};

// A flat view over one parameter array; is_weight selects weight-decay.
struct ParamView {
    double* data;
    std::size_t size;
    bool is_weight;
};

StreamHead init_head(const ActionTree& tree, std::size_t d, double gamma, Rng& rng);
HeadGrads make_grads_like(const StreamHead& head);

std::vector<ParamView> param_views(StreamHead& head);
std::vector<ParamView> grad_views(HeadGrads& grads);

std::size_t param_count(const StreamHead& head);
Vec flatten_params(const StreamHead& head);
void set_params(StreamHead& head, const Vec& flat);
Vec flatten_grads(const HeadGrads& grads);

// Per-batch intermediates kept for the backward pass.
struct ForwardCache {
    Mat t;       // batch x d, transformed vectors w2 * F + b2
    Mat cos_tp;  // batch x N_A, cos(t_i, p_k)
};

BatchPredictions forward(const StreamHead& head, const PrototypeBank& bank, const Mat& feats,
                         ForwardCache* cache = nullptr);

// Accumulates parameter gradients for given upstream gradients w.r.t. the two
// logit blocks. Prototypes are constants here (stop-gradient).
void backward(const StreamHead& head, const PrototypeBank& bank, const Mat& feats,
              const ForwardCache& cache, const Mat& d_body_logits, const Mat& d_action_logits,
              HeadGrads& out);

BatchPredictions fuse(const BatchPredictions& a, const BatchPredictions& b,
                      Fusion mode = Fusion::prob_mean);

} // namespace pcan
