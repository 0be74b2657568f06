#include <string>

#include "doctest.h"

#include "pcan/common.hpp"
#include "pcan/config.hpp"

using namespace pcan;

namespace {

void check_same(const TrainConfig& a, const TrainConfig& b) {
    CHECK(a.lr == b.lr);
    CHECK(a.momentum == b.momentum);
    CHECK(a.weight_decay == b.weight_decay);
    CHECK(a.batch_size == b.batch_size);
    CHECK(a.epochs == b.epochs);
    CHECK(a.lr_drop_epochs == b.lr_drop_epochs);
    CHECK(a.seed == b.seed);
    CHECK(a.hp.lambda == b.hp.lambda);
    CHECK(a.hp.rho == b.hp.rho);
    CHECK(a.hp.tau == b.hp.tau);
    CHECK(a.hp.alpha == b.hp.alpha);
    CHECK(a.hp.beta == b.hp.beta);
    CHECK(a.hp.gamma_a == b.hp.gamma_a);
    CHECK(a.hp.gamma_b == b.hp.gamma_b);
    CHECK(a.hp.fp_sign == b.hp.fp_sign);
    CHECK(a.hp_mode == b.hp_mode);
    CHECK(a.fusion == b.fusion);
    CHECK(a.pda_updates_prototypes == b.pda_updates_prototypes);
    CHECK(a.warmup_epochs == b.warmup_epochs);
    CHECK(a.use_hp == b.use_hp);
    CHECK(a.use_pcc == b.use_pcc);
    CHECK(a.use_pda == b.use_pda);
    CHECK(a.use_rectify == b.use_rectify);
}

} // namespace

TEST_SUITE("config") {

TEST_CASE("key-value parsing with comments, arrays and quoting") {
    const std::string text =
        "# run settings\n"
        "lr = 0.02   # inline comment\n"
        "\n"
        "name = \"toy run\"\n"
        "drops = [3, 7, 11]\n"
        "weights = [1, 0.5, 0.1]\n"
        "flag=true\n";
    const KvDoc doc = parse_kv_text(text, "demo.toml");
    CHECK(doc.entries.size() == 5);
    CHECK(doc.has("lr"));
    CHECK_FALSE(doc.has("missing"));
    CHECK(doc.get_double("lr") == 0.02);
    CHECK(doc.get_string("name") == "toy run");
    CHECK(doc.get_int_list("drops") == std::vector<int>{3, 7, 11});
    CHECK(doc.get_double_list("weights") == std::vector<double>{1.0, 0.5, 0.1});
    CHECK(doc.get_bool("flag"));
}

TEST_CASE("parser errors carry origin and line number") {
    auto expect_message = [](const std::string& text, const std::string& needle) {
        try {
            (void)parse_kv_text(text, "bad.toml");
            FAIL("expected a parse error for: ", text);
        } catch (const parse_error& e) {
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
    };
    expect_message("lr 0.02\n", "bad.toml:1");
    expect_message("ok = 1\n= 2\n", "bad.toml:2");
    expect_message("key =\n", "empty value");
    expect_message("a = 1\na = 2\n", "duplicate key 'a'");
}

TEST_CASE("typed accessors name the offending key") {
    const KvDoc doc = parse_kv_text("x = hello\ny = 1.5\n");
    CHECK_THROWS_AS((void)doc.get_double("x"), parse_error);
    CHECK_THROWS_AS((void)doc.get_int("y"), parse_error);
    CHECK_THROWS_AS((void)doc.get_bool("x"), parse_error);
    CHECK_THROWS_AS((void)doc.raw("absent"), parse_error);
    CHECK_THROWS_AS((void)doc.get_double_list("x"), parse_error);
    try {
        (void)doc.get_int("x");
        FAIL("expected a parse error");
    } catch (const parse_error& e) {
        CHECK(std::string(e.what()).find("'x'") != std::string::npos);
    }
}

TEST_CASE("training config renders and parses back unchanged") {
    TrainConfig cfg;
    cfg.lr = 0.0123;
    cfg.epochs = 17;
    cfg.lr_drop_epochs = {4, 9};
    cfg.seed = 987654321098765ULL;
    cfg.hp.lambda = 0.1;
    cfg.hp.alpha = {1.0, 0.25, 0.05};
    cfg.hp.fp_sign = FpSign::repel;
    cfg.hp_mode = HpMode::concat;
    cfg.fusion = Fusion::logit_sum;
    cfg.use_pda = false;
    cfg.warmup_epochs = 2;

    const std::string text = train_config_to_text(cfg);
    const TrainConfig back = train_config_from_kv(parse_kv_text(text));
    check_same(cfg, back);
    CHECK(train_config_hash(cfg) == train_config_hash(back));
}

TEST_CASE("defaults survive an empty document") {
    const TrainConfig cfg = train_config_from_kv(parse_kv_text(""));
    check_same(cfg, TrainConfig{});
    const SynthConfig s = synth_config_from_kv(parse_kv_text(""));
    CHECK(s.n_body == 7);
    CHECK(s.n_action == 52);
    CHECK(s.d == 64);
}

TEST_CASE("unknown keys are rejected instead of silently ignored") {
    CHECK_THROWS_AS((void)train_config_from_kv(parse_kv_text("learning_rate = 0.1\n")),
                    parse_error);
    CHECK_THROWS_AS((void)synth_config_from_kv(parse_kv_text("bodies = 3\n")), parse_error);
}

TEST_CASE("builders validate the resulting config") {
    CHECK_THROWS_AS((void)train_config_from_kv(parse_kv_text("lr = -1\n")), contract_error);
    CHECK_THROWS_AS((void)train_config_from_kv(parse_kv_text("alpha = [1, 2]\n")), parse_error);
    CHECK_THROWS_AS((void)synth_config_from_kv(parse_kv_text("noise_sigma = 0\n")), contract_error);
}

TEST_CASE("synthesis config round trips") {
    SynthConfig cfg;
    cfg.n_body = 3;
    cfg.n_action = 11;
    cfg.d = 24;
    cfg.samples_per_class = 12;
    cfg.seed = 42;
    cfg.body_sep = 66.5;
    cfg.action_sep = 9.25;
    cfg.noise_sigma = 0.4;
    cfg.stream_corr = 0.75;
    const SynthConfig back = synth_config_from_kv(parse_kv_text(synth_config_to_text(cfg)));
    CHECK(back.n_body == cfg.n_body);
    CHECK(back.n_action == cfg.n_action);
    CHECK(back.d == cfg.d);
    CHECK(back.samples_per_class == cfg.samples_per_class);
    CHECK(back.seed == cfg.seed);
    CHECK(back.body_sep == cfg.body_sep);
    CHECK(back.action_sep == cfg.action_sep);
    CHECK(back.noise_sigma == cfg.noise_sigma);
    CHECK(back.stream_corr == cfg.stream_corr);
}

TEST_CASE("the config hash pins every field") {
    const TrainConfig base;
    const std::uint64_t h0 = train_config_hash(base);
    CHECK(h0 == train_config_hash(TrainConfig{}));  // stable across calls

    TrainConfig mod = base;
    mod.hp.lambda = 0.2;
    CHECK(train_config_hash(mod) != h0);
    mod = base;
    mod.seed = 1;
    CHECK(train_config_hash(mod) != h0);
    mod = base;
    mod.use_pcc = false;
    CHECK(train_config_hash(mod) != h0);
    mod = base;
    mod.epochs = 41;
    CHECK(train_config_hash(mod) != h0);
}

TEST_CASE("sweep assignments") {
    TrainConfig cfg;
    apply_sweep_value(cfg, "lambda", "0.1");
    CHECK(cfg.hp.lambda == 0.1);
    apply_sweep_value(cfg, "alpha", "1:0.5:0.1");
    CHECK(cfg.hp.alpha == std::array<double, 3>{1.0, 0.5, 0.1});
    apply_sweep_value(cfg, "fp_sign", "repel");
    CHECK(cfg.hp.fp_sign == FpSign::repel);
    apply_sweep_value(cfg, "batch_size", "4");
    CHECK(cfg.batch_size == 4);

    CHECK_THROWS_AS(apply_sweep_value(cfg, "alpha", "1:2"), parse_error);
    CHECK_THROWS_AS(apply_sweep_value(cfg, "alpha", "1:2:x"), parse_error);
    CHECK_THROWS_AS(apply_sweep_value(cfg, "nonesuch", "1"), parse_error);
    CHECK_THROWS_AS(apply_sweep_value(cfg, "rho", "1.5"), contract_error);
}

TEST_CASE("shortest round-trip float rendering") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(-2.5) == "-2.5");
    CHECK(format_double(0.0075) == "0.0075");
    CHECK(format_double(1e-4) == "1e-04");
    CHECK(parse_kv_text("x = 1e-04\n").get_double("x") == 1e-4);
    const double tricky = 0.1 + 0.2;
    CHECK(format_double(tricky) == "0.30000000000000004");
}

} // TEST_SUITE
