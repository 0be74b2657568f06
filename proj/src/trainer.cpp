#include "pcan/trainer.hpp"

#include <cmath>
#include <sstream>

#include "json.hpp"

#include "pcan/common.hpp"
#include "pcan/config.hpp"

namespace pcan {

using nlohmann::json;

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw contract_error("TrainConfig: lr must be > 0");
    if (momentum < 0.0 || momentum >= 1.0) throw contract_error("TrainConfig: momentum must be in [0, 1)");
    if (weight_decay < 0.0) throw contract_error("TrainConfig: weight_decay must be >= 0");
    if (batch_size < 1) throw contract_error("TrainConfig: batch_size must be >= 1");
    if (epochs < 1) throw contract_error("TrainConfig: epochs must be >= 1");
    for (int t : lr_drop_epochs) {
        if (t < 1 || t >= epochs) {
            throw contract_error("TrainConfig: lr_drop_epochs entries must satisfy 1 <= t < epochs");
        }
    }
    if (warmup_epochs < 0) throw contract_error("TrainConfig: warmup_epochs must be >= 0");
    hp.validate();
}

double lr_at_epoch(const TrainConfig& cfg, int epoch) {
    double lr = cfg.lr;
    for (int t : cfg.lr_drop_epochs) {
        if (t <= epoch) lr /= 10.0;
    }
    return lr;
}

void step_sgd(const std::vector<ParamView>& params, const std::vector<ParamView>& grads,
              const std::vector<ParamView>& velocity, double lr, double momentum,
              double weight_decay) {
    if (params.size() != grads.size() || params.size() != velocity.size()) {
        throw contract_error("step_sgd: view list mismatch");
    }
    for (std::size_t a = 0; a < params.size(); ++a) {
        if (params[a].size != grads[a].size || params[a].size != velocity[a].size) {
            throw contract_error("step_sgd: array size mismatch");
        }
        const double wd = params[a].is_weight ? weight_decay : 0.0;
        double* p = params[a].data;
        const double* g = grads[a].data;
        double* v = velocity[a].data;
        for (std::size_t i = 0; i < params[a].size; ++i) {
            v[i] = momentum * v[i] + g[i] + wd * p[i];
            p[i] -= lr * v[i];
        }
    }
}

namespace {

json mat_to_json(const Mat& m) {
    return json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

Mat mat_from_json(const json& j) {
    Mat m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    m.data = j.at("data").get<Vec>();
    if (m.data.size() != m.rows * m.cols) throw parse_error("checkpoint: matrix size mismatch");
    return m;
}

json head_to_json(const StreamHead& h) {
    return json{{"cls_b", mat_to_json(h.cls_b)}, {"bias_b", h.bias_b}, {"w1", mat_to_json(h.w1)},
                {"b1", h.b1},                    {"w2", mat_to_json(h.w2)}, {"b2", h.b2},
                {"gamma", h.gamma}};
}

StreamHead head_from_json(const json& j) {
    StreamHead h;
    h.cls_b = mat_from_json(j.at("cls_b"));
    h.bias_b = j.at("bias_b").get<Vec>();
    h.w1 = mat_from_json(j.at("w1"));
    h.b1 = j.at("b1").get<Vec>();
    h.w2 = mat_from_json(j.at("w2"));
    h.b2 = j.at("b2").get<Vec>();
    h.gamma = j.at("gamma").get<double>();
    return h;
}

json grads_to_json(const HeadGrads& g) {
    return json{{"cls_b", mat_to_json(g.cls_b)}, {"bias_b", g.bias_b}, {"w1", mat_to_json(g.w1)},
                {"b1", g.b1},                    {"w2", mat_to_json(g.w2)}, {"b2", g.b2}};
}

HeadGrads grads_from_json(const json& j) {
    HeadGrads g;
    g.cls_b = mat_from_json(j.at("cls_b"));
    g.bias_b = j.at("bias_b").get<Vec>();
    g.w1 = mat_from_json(j.at("w1"));
    g.b1 = j.at("b1").get<Vec>();
    g.w2 = mat_from_json(j.at("w2"));
    g.b2 = j.at("b2").get<Vec>();
    return g;
}

json bank_to_json(const PrototypeBank& b) {
    return json{{"p_body", mat_to_json(b.p_body)},
                {"p_action", mat_to_json(b.p_action)},
                {"rho", b.rho},
                {"init_seed", std::to_string(b.init_seed)},
                {"update_counts_body", b.update_counts_body},
                {"update_counts_action", b.update_counts_action}};
}

PrototypeBank bank_from_json(const json& j) {
    PrototypeBank b;
    b.p_body = mat_from_json(j.at("p_body"));
    b.p_action = mat_from_json(j.at("p_action"));
    b.rho = j.at("rho").get<double>();
    b.init_seed = std::stoull(j.at("init_seed").get<std::string>());
    b.update_counts_body = j.at("update_counts_body").get<std::vector<std::uint64_t>>();
    b.update_counts_action = j.at("update_counts_action").get<std::vector<std::uint64_t>>();
    return b;
}

} // namespace

std::string checkpoint_to_json_text(const Checkpoint& ckpt) {
    json j = {
        {"version", ckpt.version},
        {"epoch", ckpt.epoch},
        {"head_a", head_to_json(ckpt.head_a)},
        {"head_b", head_to_json(ckpt.head_b)},
        {"bank", bank_to_json(ckpt.bank)},
        {"opt", {{"vel_a", grads_to_json(ckpt.opt.vel_a)}, {"vel_b", grads_to_json(ckpt.opt.vel_b)}}},
        {"rng_state", ckpt.rng_state},
        {"config_hash", std::to_string(ckpt.config_hash)},
        {"best_f1_mean", ckpt.best_f1_mean},
        {"best_epoch", ckpt.best_epoch},
    };
    return j.dump() + "\n";
}

Checkpoint checkpoint_from_json_text(const std::string& text) {
    try {
        const json j = json::parse(text);
        Checkpoint ckpt;
        ckpt.version = j.at("version").get<int>();
        if (ckpt.version != 1) throw parse_error("checkpoint: unsupported version");
        ckpt.epoch = j.at("epoch").get<int>();
        ckpt.head_a = head_from_json(j.at("head_a"));
        ckpt.head_b = head_from_json(j.at("head_b"));
        ckpt.bank = bank_from_json(j.at("bank"));
        ckpt.opt.vel_a = grads_from_json(j.at("opt").at("vel_a"));
        ckpt.opt.vel_b = grads_from_json(j.at("opt").at("vel_b"));
        ckpt.rng_state = j.at("rng_state").get<std::string>();
        ckpt.config_hash = std::stoull(j.at("config_hash").get<std::string>());
        ckpt.best_f1_mean = j.at("best_f1_mean").get<double>();
        ckpt.best_epoch = j.at("best_epoch").get<int>();
        return ckpt;
    } catch (const parse_error&) {
        throw;
    } catch (const std::exception& e) {
        throw parse_error(std::string("malformed checkpoint: ") + e.what());
    }
}

namespace {

Mat gather_feats(const Dataset& ds, const std::vector<std::size_t>& idx, bool stream_a) {
    Mat feats(idx.size(), ds.d);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const Vec& src = stream_a ? ds.samples[idx[r]].fa : ds.samples[idx[r]].fb;
        std::copy(src.begin(), src.end(), feats.row(r));
    }
    return feats;
}

std::vector<LabelPair> gather_labels(const Dataset& ds, const std::vector<std::size_t>& idx) {
    std::vector<LabelPair> gt;
    gt.reserve(idx.size());
    for (std::size_t i : idx) gt.push_back(ds.samples[i].label);
    return gt;
}

struct StreamBatchOutcome {
    double ce = 0.0;
    double hp = 0.0;
    double pcc_body = 0.0;
    double pcc_action = 0.0;
};

struct StreamAccum {
    double ce = 0, hp = 0, pcc_body = 0, pcc_action = 0;
};

struct EpochAccum {
    StreamAccum a, b;
    double pda = 0;
    std::uint64_t tp_b = 0, fn_b = 0, tp_a = 0, fn_a1 = 0, fn_a2 = 0, fn_a3 = 0;
};

std::uint64_t count_sets(const std::vector<std::vector<int>>& sets) {
    std::uint64_t n = 0;
    for (const auto& s : sets) n += s.size();
    return n;
}

[[noreturn]] void abort_non_finite(int epoch, std::size_t batch_index, const char* stream,
                                   const StreamBatchOutcome& out,
                                   const std::vector<std::size_t>& idx, const Dataset& ds) {
    std::ostringstream dump;
    dump << "non-finite loss at epoch " << epoch << ", batch " << batch_index << ", stream "
         << stream << ": ce=" << out.ce << " hp=" << out.hp << " pcc_body=" << out.pcc_body
         << " pcc_action=" << out.pcc_action << "; batch samples (index body action):";
    for (std::size_t i : idx) {
        dump << " (" << i << ' ' << ds.samples[i].label.body << ' ' << ds.samples[i].label.action
             << ')';
    }
    diag::log(diag::LogLevel::warn, dump.str());
    throw std::runtime_error("training aborted: " + dump.str());
}

} // namespace

SplitPredictions predict_split(const Dataset& ds, Split split, const StreamHead& head_a,
                               const StreamHead& head_b, const PrototypeBank& bank, Fusion fusion) {
    const std::vector<std::size_t> idx = ds.split_indices(split);
    if (idx.empty()) throw contract_error("predict_split: empty split");
    SplitPredictions out;
    out.gt = gather_labels(ds, idx);
    out.a = forward(head_a, bank, gather_feats(ds, idx, true));
    out.b = forward(head_b, bank, gather_feats(ds, idx, false));
    out.fused = fuse(out.a, out.b, fusion);
    return out;
}

TrainResult train(const Dataset& ds, const TrainConfig& cfg, const Checkpoint* resume_last,
                  const Checkpoint* resume_best, int stop_after_epoch) {
    cfg.validate();
    const TreeValidation tv = validate_tree(ds.tree);
    if (!tv.ok()) throw contract_error("train: invalid action tree: " + tv.describe());
    if (ds.d == 0 || ds.samples.empty()) throw contract_error("train: empty dataset");
    const std::vector<std::size_t> train_base = ds.split_indices(Split::train);
    if (train_base.empty()) throw contract_error("train: no training samples");
    if (ds.split_indices(Split::val).empty()) throw contract_error("train: no validation samples");
    if ((resume_last == nullptr) != (resume_best == nullptr)) {
        throw contract_error("train: resume needs both the last and the best checkpoint");
    }

    const std::uint64_t cfg_hash = train_config_hash(cfg);
    Rng rng(cfg.seed);
    Checkpoint state;
    Checkpoint best;
    int start_epoch = 0;  // epochs already completed

    if (resume_last) {
        if (resume_last->config_hash != cfg_hash) {
            throw contract_error("train: checkpoint was produced by a different config");
        }
        if (resume_last->epoch >= cfg.epochs) {
            throw contract_error("train: checkpoint already has all requested epochs");
        }
        state = *resume_last;
        best = *resume_best;
        start_epoch = state.epoch;
        rng.set_state(state.rng_state);
    } else {
        state.config_hash = cfg_hash;
        state.head_a = init_head(ds.tree, ds.d, cfg.use_rectify ? cfg.hp.gamma_a : 0.0, rng);
        state.head_b = init_head(ds.tree, ds.d, cfg.use_rectify ? cfg.hp.gamma_b : 0.0, rng);
        state.bank = init_bank(ds.tree, ds.d, rng.next_u64(), cfg.hp.rho);
        state.opt.vel_a = make_grads_like(state.head_a);
        state.opt.vel_b = make_grads_like(state.head_b);
        best = state;
    }

    const int end_epoch = stop_after_epoch > 0 ? std::min(stop_after_epoch, cfg.epochs) : cfg.epochs;

    TrainResult result;
    std::vector<std::size_t> order = train_base;
    std::vector<const double*> confident;

    for (int epoch = start_epoch + 1; epoch <= end_epoch; ++epoch) {
        const double lr = lr_at_epoch(cfg, epoch);
        const bool prototypes_live = epoch > cfg.warmup_epochs;
        order = train_base;
        rng.shuffle(order);

        EpochAccum acc;
        std::size_t n_batches = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
            const std::vector<std::size_t> idx(order.begin() + begin, order.begin() + end);
            const std::vector<LabelPair> gt = gather_labels(ds, idx);
            std::vector<int> gt_action(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) gt_action[i] = gt[i].action;
            ++n_batches;

            for (int stream = 0; stream < 2; ++stream) {
                const bool is_a = stream == 0;
                StreamHead& head = is_a ? state.head_a : state.head_b;
                HeadGrads& vel = is_a ? state.opt.vel_a : state.opt.vel_b;
                const Mat feats = gather_feats(ds, idx, is_a);

                ForwardCache cache;
                const BatchPredictions preds = forward(head, state.bank, feats, &cache);
                const SamplePartition part = partition_batch(ds.tree, gt, preds);

                if (prototypes_live) {
                    for (int k = 0; k < ds.tree.n_body; ++k) {
                        if (part.tp_b[k].empty()) continue;
                        confident.clear();
                        for (int i : part.tp_b[k]) confident.push_back(feats.row(i));
                        ema_update(state.bank, Level::body, k, confident);
                    }
                    for (int k = 0; k < ds.tree.n_action; ++k) {
                        if (part.tp_a[k].empty()) continue;
                        confident.clear();
                        for (int i : part.tp_a[k]) confident.push_back(feats.row(i));
                        ema_update(state.bank, Level::action, k, confident);
                    }
                }

                StreamBatchOutcome out;
                const CeResult ce = ce_loss(preds.action_logits, gt_action);
                out.ce = ce.value;
                Mat d_body(idx.size(), ds.tree.n_body);
                Mat d_action = ce.grad_logits;
                if (cfg.use_hp) {
                    const HpResult hp = hp_loss(ds.tree, preds.body_logits, preds.action_logits,
                                                gt_action, cfg.hp.lambda, cfg.hp_mode);
                    out.hp = hp.value;
                    d_body = hp.grad_body;
                    for (std::size_t i = 0; i < d_action.data.size(); ++i) {
                        d_action.data[i] += hp.grad_action.data[i];
                    }
                }
                if (cfg.use_pcc) {
                    // Features are inputs, not parameters, so the calibration
                    // gradient stops here; the loss is still computed, verified
                    // and logged.
                    out.pcc_body =
                        pcc_loss(feats, part, state.bank, preds.body_probs, cfg.hp, Level::body)
                            .value;
                    out.pcc_action =
                        pcc_loss(feats, part, state.bank, preds.action_probs, cfg.hp, Level::action)
                            .value;
                }
                if (!std::isfinite(out.ce) || !std::isfinite(out.hp) ||
                    !std::isfinite(out.pcc_body) || !std::isfinite(out.pcc_action)) {
                    abort_non_finite(epoch, n_batches - 1, is_a ? "a" : "b", out, idx, ds);
                }

                HeadGrads grads = make_grads_like(head);
                backward(head, state.bank, feats, cache, d_body, d_action, grads);
                step_sgd(param_views(head), grad_views(grads), grad_views(vel), lr, cfg.momentum,
                         cfg.weight_decay);

                StreamAccum& sa = is_a ? acc.a : acc.b;
                sa.ce += out.ce;
                sa.hp += out.hp;
                sa.pcc_body += out.pcc_body;
                sa.pcc_action += out.pcc_action;
                acc.tp_b += count_sets(part.tp_b);
                acc.fn_b += count_sets(part.fn_b);
                acc.tp_a += count_sets(part.tp_a);
                acc.fn_a1 += count_sets(part.fn_a1);
                acc.fn_a2 += count_sets(part.fn_a2);
                acc.fn_a3 += count_sets(part.fn_a3);
            }

            if (cfg.use_pda) {
                const PdaResult pda = pda_loss(state.bank.p_action);
                if (!std::isfinite(pda.value)) {
                    StreamBatchOutcome out;
                    abort_non_finite(epoch, n_batches - 1, "pda", out, idx, ds);
                }
                acc.pda += pda.value;
                if (cfg.pda_updates_prototypes && prototypes_live) {
                    const double scale = lr * cfg.hp.beta;
                    for (std::size_t i = 0; i < state.bank.p_action.data.size(); ++i) {
                        state.bank.p_action.data[i] -= scale * pda.grad.data[i];
                    }
                }
            }
        }

        const double inv = 1.0 / static_cast<double>(n_batches);
        const SplitPredictions val =
            predict_split(ds, Split::val, state.head_a, state.head_b, state.bank, cfg.fusion);
        const MetricsReport val_report = evaluate(val.fused, val.gt, ds.tree);

        state.epoch = epoch;
        state.rng_state = rng.state();
        if (val_report.f1_mean > state.best_f1_mean) {
            state.best_f1_mean = val_report.f1_mean;
            state.best_epoch = epoch;
            best = state;
        } else {
            best.best_f1_mean = state.best_f1_mean;
            best.best_epoch = state.best_epoch;
        }

        const double pda_mean = acc.pda * inv;
        const auto stream_json = [&](const StreamAccum& sa) {
            const double ce = sa.ce * inv;
            const double hp = sa.hp * inv;
            const double pcc_body = sa.pcc_body * inv;
            const double pcc_action = sa.pcc_action * inv;
            return json{{"ce", ce},
                        {"hp", hp},
                        {"pcc_body", pcc_body},
                        {"pcc_action", pcc_action},
                        {"pda", pda_mean},
                        {"total", ce + hp + pcc_body + pcc_action + cfg.hp.beta * pda_mean}};
        };
        json line = {
            {"epoch", epoch},
            {"lr", lr},
            {"stream_a", stream_json(acc.a)},
            {"stream_b", stream_json(acc.b)},
            {"sets",
             {{"tp_b", acc.tp_b},
              {"fn_b", acc.fn_b},
              {"tp_a", acc.tp_a},
              {"fn_a1", acc.fn_a1},
              {"fn_a2", acc.fn_a2},
              {"fn_a3", acc.fn_a3}}},
            {"val",
             {{"body_top1", val_report.body_top1},
              {"action_top1", val_report.action_top1},
              {"action_top5", val_report.action_top5},
              {"f1_mean", val_report.f1_mean}}},
        };
        result.epoch_log.push_back(line.dump());
    }

    result.last = state;
    result.best = best;
    const Split eval_split = ds.split_indices(Split::test).empty() ? Split::val : Split::test;
    const SplitPredictions test =
        predict_split(ds, eval_split, best.head_a, best.head_b, best.bank, cfg.fusion);
    result.final_test = evaluate(test.fused, test.gt, ds.tree);
    return result;
}

} // namespace pcan
