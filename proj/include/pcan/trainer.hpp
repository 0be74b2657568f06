#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pcan/data.hpp"
#include "pcan/losses.hpp"
#include "pcan/metrics.hpp"
#include "pcan/model.hpp"
#include "pcan/prototype.hpp"

namespace pcan {

struct TrainConfig {
    double lr = 0.0075;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    int batch_size = 10;
    int epochs = 40;
    std::vector<int> lr_drop_epochs{15, 30};  // 1-indexed epochs; divide lr by 10 at each
    std::uint64_t seed = 0;
    HyperParams hp;
    HpMode hp_mode = HpMode::tree;
    Fusion fusion = Fusion::prob_mean;
    bool pda_updates_prototypes = true;
    int warmup_epochs = 0;  // prototypes frozen (no EMA, no PDA step) during warmup

    // Objective-term switches; all-off except CE gives the plain-linear-head
    // baseline (use_rectify=false zeroes gamma so the prototype term vanishes).
    bool use_hp = true;
    bool use_pcc = true;
    bool use_pda = true;
    bool use_rectify = true;

    void validate() const;
};

/// Effective learning rate at a 1-indexed epoch under the drop schedule.
double lr_at_epoch(const TrainConfig& cfg, int epoch);

struct OptimState {
    HeadGrads vel_a;
    HeadGrads vel_b;
};

/// Full training state at an epoch boundary; resuming from it reproduces the
/// uninterrupted run bit-exactly.
struct Checkpoint {
    int version = 1;
    int epoch = 0;  // epochs completed
    StreamHead head_a;
    StreamHead head_b;
    PrototypeBank bank;
    OptimState opt;
    std::string rng_state;
    std::uint64_t config_hash = 0;
    double best_f1_mean = -1.0;  // best validation F1_mean seen so far
    int best_epoch = -1;
};

std::string checkpoint_to_json_text(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json_text(const std::string& text);

/// One SGD-with-momentum update over aligned parameter / gradient / velocity
/// views: v <- momentum*v + grad + weight_decay*param (decay on weights only),
/// then param <- param - lr*v.
void step_sgd(const std::vector<ParamView>& params, const std::vector<ParamView>& grads,
              const std::vector<ParamView>& velocity, double lr, double momentum,
              double weight_decay);

struct SplitPredictions {
    BatchPredictions a;
    BatchPredictions b;
    BatchPredictions fused;
    std::vector<LabelPair> gt;
};

SplitPredictions predict_split(const Dataset& ds, Split split, const StreamHead& head_a,
                               const StreamHead& head_b, const PrototypeBank& bank, Fusion fusion);

struct TrainResult {
    Checkpoint last;
    Checkpoint best;
    std::vector<std::string> epoch_log;  // one JSON line per epoch run in this call
    MetricsReport final_test;            // test split, best heads, fused
};

/// Runs (or resumes) the optimization loop. Per batch and per stream:
/// forward -> partition -> EMA update of every class with a nonempty confident
/// set -> losses -> SGD step on the head; after both streams one PDA read of
/// the action bank (logged, and applied as a prototype step when configured).
/// Validation runs each epoch on fused predictions; the best-F1_mean epoch is
/// retained. Throws std::runtime_error on a non-finite loss, naming the batch.
///
/// stop_after_epoch > 0 ends the call early, as if the run had been
/// interrupted at that epoch boundary; resuming from the returned checkpoints
/// under the same config reproduces the uninterrupted run bit-exactly.
TrainResult train(const Dataset& ds, const TrainConfig& cfg,
                  const Checkpoint* resume_last = nullptr,
                  const Checkpoint* resume_best = nullptr, int stop_after_epoch = 0);

} // namespace pcan
