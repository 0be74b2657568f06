#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

#include "pcan/common.hpp"
#include "pcan/config.hpp"
#include "pcan/trainer.hpp"

using namespace pcan;

namespace {

SynthConfig toy_synth() {
    SynthConfig cfg;
    cfg.n_body = 2;
    cfg.n_action = 4;
    cfg.d = 8;
    cfg.samples_per_class = 8;
    cfg.seed = 12;
    cfg.body_sep = 80.0;
    cfg.action_sep = 30.0;
    cfg.noise_sigma = 0.05;
    cfg.stream_corr = 0.5;
    return cfg;
}

TrainConfig toy_train(int epochs) {
    TrainConfig cfg;
    cfg.lr = 0.02;
    cfg.batch_size = 5;
    cfg.epochs = epochs;
    cfg.lr_drop_epochs = {};
    cfg.seed = 1;
    return cfg;
}

} // namespace

TEST_SUITE("trainer") {

TEST_CASE("learning rate drops by ten at each scheduled epoch") {
    TrainConfig cfg;
    CHECK(lr_at_epoch(cfg, 1) == 0.0075);
    CHECK(lr_at_epoch(cfg, 14) == 0.0075);
    CHECK(lr_at_epoch(cfg, 15) == doctest::Approx(0.00075).epsilon(1e-12));
    CHECK(lr_at_epoch(cfg, 29) == doctest::Approx(0.00075).epsilon(1e-12));
    CHECK(lr_at_epoch(cfg, 30) == doctest::Approx(0.000075).epsilon(1e-12));
    CHECK(lr_at_epoch(cfg, 40) == doctest::Approx(0.000075).epsilon(1e-12));
}

TEST_CASE("config validation") {
    TrainConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.lr = 0.0;
    CHECK_THROWS_AS(cfg.validate(), contract_error);
    cfg = TrainConfig{};
    cfg.momentum = 1.0;
    CHECK_THROWS_AS(cfg.validate(), contract_error);
    cfg = TrainConfig{};
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), contract_error);
    cfg = TrainConfig{};
    cfg.lr_drop_epochs = {40};  // must fall strictly inside the run
    CHECK_THROWS_AS(cfg.validate(), contract_error);
    cfg = TrainConfig{};
    cfg.warmup_epochs = -1;
    CHECK_THROWS_AS(cfg.validate(), contract_error);
}

TEST_CASE("sgd recurrence golden on f(x) = x^2") {
    double x = 1.0, g = 0.0, v = 0.0;
    const std::vector<ParamView> params{{&x, 1, true}};
    const std::vector<ParamView> grads{{&g, 1, true}};
    const std::vector<ParamView> vel{{&v, 1, true}};

    g = 2.0 * x;
    step_sgd(params, grads, vel, 0.1, 0.9, 0.0);
    CHECK(x == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(v == doctest::Approx(2.0).epsilon(1e-15));

    g = 2.0 * x;
    step_sgd(params, grads, vel, 0.1, 0.9, 0.0);
    CHECK(x == doctest::Approx(0.46).epsilon(1e-15));
    CHECK(v == doctest::Approx(3.4).epsilon(1e-15));
}

TEST_CASE("weight decay touches weights but not biases") {
    double w = 2.0, b = 2.0, gw = 0.0, gb = 0.0, vw = 0.0, vb = 0.0;
    const std::vector<ParamView> params{{&w, 1, true}, {&b, 1, false}};
    const std::vector<ParamView> grads{{&gw, 1, true}, {&gb, 1, false}};
    const std::vector<ParamView> vel{{&vw, 1, true}, {&vb, 1, false}};
    step_sgd(params, grads, vel, 0.5, 0.0, 0.1);
    CHECK(w == doctest::Approx(2.0 - 0.5 * 0.1 * 2.0).epsilon(1e-15));
    CHECK(b == 2.0);

    // zero learning rate leaves parameters alone even with live gradients
    gw = 3.0;
    gb = -1.0;
    step_sgd(params, grads, vel, 0.0, 0.0, 0.1);
    CHECK(w == doctest::Approx(2.0 - 0.5 * 0.1 * 2.0).epsilon(1e-15));
    CHECK(b == 2.0);
}

TEST_CASE("training is bit-deterministic per seed") {
    const Dataset ds = generate(toy_synth());
    const TrainConfig cfg = toy_train(2);
    const TrainResult r1 = train(ds, cfg);
    const TrainResult r2 = train(ds, cfg);
    REQUIRE(r1.epoch_log.size() == 2);
    CHECK(r1.epoch_log == r2.epoch_log);
    CHECK(checkpoint_to_json_text(r1.last) == checkpoint_to_json_text(r2.last));
    CHECK(checkpoint_to_json_text(r1.best) == checkpoint_to_json_text(r2.best));

    TrainConfig other = cfg;
    other.seed = 2;
    const TrainResult r3 = train(ds, other);
    CHECK(r1.epoch_log != r3.epoch_log);
}

TEST_CASE("epoch log lines carry the full loss and set breakdown") {
    const Dataset ds = generate(toy_synth());
    const TrainResult res = train(ds, toy_train(1));
    REQUIRE(res.epoch_log.size() == 1);
    const nlohmann::json line = nlohmann::json::parse(res.epoch_log[0]);

    CHECK(line.at("epoch") == 1);
    CHECK(line.at("lr") == 0.02);
    for (const char* stream : {"stream_a", "stream_b"}) {
        const auto& s = line.at(stream);
        for (const char* key : {"ce", "hp", "pcc_body", "pcc_action", "pda", "total"}) {
            CHECK(s.contains(key));
        }
        const double total = s.at("ce").get<double>() + s.at("hp").get<double>() +
                             s.at("pcc_body").get<double>() + s.at("pcc_action").get<double>() +
                             5.0 * s.at("pda").get<double>();
        CHECK(std::abs(s.at("total").get<double>() - total) < 1e-12);
    }
    CHECK(line.at("stream_a").at("pda") == line.at("stream_b").at("pda"));

    const auto& sets = line.at("sets");
    const auto n = sets.at("tp_a").get<std::uint64_t>() + sets.at("fn_a1").get<std::uint64_t>() +
                   sets.at("fn_a2").get<std::uint64_t>() + sets.at("fn_a3").get<std::uint64_t>();
    CHECK(n == 2 * ds.split_indices(Split::train).size());  // both streams
    CHECK(sets.at("tp_b").get<std::uint64_t>() + sets.at("fn_b").get<std::uint64_t>() == n);

    const auto& val = line.at("val");
    for (const char* key : {"body_top1", "action_top1", "action_top5", "f1_mean"}) {
        CHECK(val.contains(key));
    }
}

TEST_CASE("a vanishing learning rate freezes the heads while prototypes keep moving") {
    const Dataset ds = generate(toy_synth());
    TrainConfig cfg = toy_train(1);
    cfg.lr = 1e-300;

    // replay the initialization draw order: head A, head B, then the bank seed
    Rng rng(cfg.seed);
    const StreamHead init_a = init_head(ds.tree, ds.d, cfg.hp.gamma_a, rng);
    const StreamHead init_b = init_head(ds.tree, ds.d, cfg.hp.gamma_b, rng);
    const PrototypeBank init_bank_state = init_bank(ds.tree, ds.d, rng.next_u64(), cfg.hp.rho);

    const TrainResult res = train(ds, cfg);
    const Vec before = flatten_params(init_a);
    const Vec after = flatten_params(res.last.head_a);
    REQUIRE(before.size() == after.size());
    double max_shift = 0.0;
    for (std::size_t i = 0; i < before.size(); ++i) {
        max_shift = std::max(max_shift, std::abs(before[i] - after[i]));
    }
    CHECK(max_shift < 1e-250);
    CHECK(res.last.head_b.gamma == init_b.gamma);

    std::uint64_t updates = 0;
    for (std::uint64_t c : res.last.bank.update_counts_action) updates += c;
    for (std::uint64_t c : res.last.bank.update_counts_body) updates += c;
    CHECK(updates > 0);
    CHECK(res.last.bank.p_action.data != init_bank_state.p_action.data);
}

TEST_CASE("an easy toy problem trains to perfect accuracy") {
    SynthConfig synth = toy_synth();
    synth.noise_sigma = 0.02;
    const Dataset ds = generate(synth);
    const TrainResult res = train(ds, toy_train(30));

    const SplitPredictions preds = predict_split(ds, Split::train, res.last.head_a,
                                                 res.last.head_b, res.last.bank, Fusion::prob_mean);
    const MetricsReport report = evaluate(preds.fused, preds.gt, ds.tree);
    CHECK(report.action_top1 == 1.0);
    CHECK(report.body_top1 == 1.0);
    CHECK(res.final_test.action_top1 > 0.5);
    CHECK(res.best.best_epoch >= 1);
    CHECK(res.best.best_f1_mean == res.last.best_f1_mean);
    CHECK(res.best.epoch == res.best.best_epoch);
}

TEST_CASE("checkpoints round trip through json bit-exactly") {
    const Dataset ds = generate(toy_synth());
    const TrainResult res = train(ds, toy_train(2));
    const std::string text = checkpoint_to_json_text(res.last);
    const Checkpoint back = checkpoint_from_json_text(text);

    CHECK(back.version == res.last.version);
    CHECK(back.epoch == res.last.epoch);
    CHECK(back.head_a == res.last.head_a);
    CHECK(back.head_b == res.last.head_b);
    CHECK(back.bank.p_body == res.last.bank.p_body);
    CHECK(back.bank.p_action == res.last.bank.p_action);
    CHECK(back.bank.rho == res.last.bank.rho);
    CHECK(back.bank.init_seed == res.last.bank.init_seed);
    CHECK(back.bank.update_counts_body == res.last.bank.update_counts_body);
    CHECK(back.bank.update_counts_action == res.last.bank.update_counts_action);
    CHECK(flatten_grads(back.opt.vel_a) == flatten_grads(res.last.opt.vel_a));
    CHECK(flatten_grads(back.opt.vel_b) == flatten_grads(res.last.opt.vel_b));
    CHECK(back.rng_state == res.last.rng_state);
    CHECK(back.config_hash == res.last.config_hash);
    CHECK(back.best_f1_mean == res.last.best_f1_mean);
    CHECK(back.best_epoch == res.last.best_epoch);
    // serializing the reloaded state reproduces the text verbatim
    CHECK(checkpoint_to_json_text(back) == text);

    CHECK_THROWS_AS((void)checkpoint_from_json_text("not json"), parse_error);
    CHECK_THROWS_AS((void)checkpoint_from_json_text("{\"version\": 2}"), parse_error);
}

TEST_CASE("an interrupted run resumed from its checkpoints matches the uninterrupted run") {
    const Dataset ds = generate(toy_synth());
    const TrainConfig cfg = toy_train(4);

    const TrainResult full = train(ds, cfg);
    const TrainResult first = train(ds, cfg, nullptr, nullptr, /*stop_after_epoch=*/2);
    REQUIRE(first.last.epoch == 2);
    const TrainResult second = train(ds, cfg, &first.last, &first.best);

    CHECK(checkpoint_to_json_text(second.last) == checkpoint_to_json_text(full.last));
    CHECK(checkpoint_to_json_text(second.best) == checkpoint_to_json_text(full.best));
    std::vector<std::string> stitched = first.epoch_log;
    stitched.insert(stitched.end(), second.epoch_log.begin(), second.epoch_log.end());
    CHECK(stitched == full.epoch_log);
}

TEST_CASE("resume guards") {
    const Dataset ds = generate(toy_synth());
    const TrainConfig cfg = toy_train(3);
    const TrainResult first = train(ds, cfg, nullptr, nullptr, 1);

    CHECK_THROWS_AS((void)train(ds, cfg, &first.last, nullptr), contract_error);

    TrainConfig other = cfg;
    other.lr = 0.03;
    CHECK_THROWS_AS((void)train(ds, other, &first.last, &first.best), contract_error);

    const TrainResult done = train(ds, cfg, &first.last, &first.best);
    CHECK_THROWS_AS((void)train(ds, cfg, &done.last, &done.best), contract_error);
}

TEST_CASE("training requires train and validation data and a sound tree") {
    Dataset ds = generate(toy_synth());
    const TrainConfig cfg = toy_train(1);

    Dataset no_val = ds;
    for (Sample& s : no_val.samples) s.split = Split::train;
    CHECK_THROWS_AS((void)train(no_val, cfg), contract_error);

    Dataset bad_tree = ds;
    bad_tree.tree.parent[0] = 7;
    CHECK_THROWS_AS((void)train(bad_tree, cfg), contract_error);

    Dataset empty;
    empty.tree = ds.tree;
    empty.d = ds.d;
    CHECK_THROWS_AS((void)train(empty, cfg), contract_error);
}

TEST_CASE("without a test split the final report falls back to validation data") {
    SynthConfig synth = toy_synth();
    synth.samples_per_class = 2;  // one train + one val sample per class
    const Dataset ds = generate(synth);
    CHECK(ds.split_indices(Split::test).empty());
    TrainConfig cfg = toy_train(2);
    cfg.batch_size = 4;
    const TrainResult res = train(ds, cfg);

    const SplitPredictions val = predict_split(ds, Split::val, res.best.head_a, res.best.head_b,
                                               res.best.bank, cfg.fusion);
    const MetricsReport want = evaluate(val.fused, val.gt, ds.tree);
    CHECK(res.final_test.action_top1 == want.action_top1);
    CHECK(res.final_test.f1_mean == want.f1_mean);
}

TEST_CASE("exploding losses abort with a diagnostic instead of propagating nans") {
    const Dataset ds = generate(toy_synth());
    TrainConfig cfg = toy_train(5);
    cfg.lr = 1e15;
    try {
        (void)train(ds, cfg);
        FAIL("expected the run to abort");
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("non-finite") != std::string::npos);
        CHECK(msg.find("epoch") != std::string::npos);
        CHECK(msg.find("batch") != std::string::npos);
    }
}

} // TEST_SUITE
