#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "pcan/certify.hpp"
#include "pcan/common.hpp"
#include "pcan/config.hpp"
#include "pcan/data.hpp"
#include "pcan/metrics.hpp"
#include "pcan/trainer.hpp"

namespace fs = std::filesystem;
using namespace pcan;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw parse_error("cannot open: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw parse_error("cannot open for writing: " + path);
    out << content;
    if (!out) throw parse_error("write failed: " + path);
}

void append_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw parse_error("cannot open for writing: " + path);
    out << content;
    if (!out) throw parse_error("write failed: " + path);
}

int cmd_gen(const std::string& config_path, const std::string& out_path) {
    const SynthConfig cfg = synth_config_from_kv(load_kv_file(config_path));
    const Dataset ds = generate(cfg);
    save_dataset(ds, out_path);
    std::size_t n_train = ds.split_indices(Split::train).size();
    std::size_t n_val = ds.split_indices(Split::val).size();
    std::size_t n_test = ds.split_indices(Split::test).size();
    std::cout << "wrote " << out_path << ": " << ds.samples.size() << " samples ("
              << n_train << " train / " << n_val << " val / " << n_test << " test), "
              << ds.tree.n_body << " body classes, " << ds.tree.n_action << " action classes, d="
              << ds.d << "\n";
    return 0;
}

int cmd_train(const std::string& data_path, const std::string& config_path,
              const std::string& out_dir, bool resume, int stop_after) {
    const TrainConfig cfg = train_config_from_kv(load_kv_file(config_path));
    const Dataset ds = load_dataset(data_path);
    fs::create_directories(out_dir);

    const fs::path dir(out_dir);
    const std::string log_path = (dir / "log.jsonl").string();
    const std::string best_path = (dir / "checkpoint_best.json").string();
    const std::string last_path = (dir / "checkpoint_last.json").string();

    TrainResult result;
    if (resume) {
        const Checkpoint last = checkpoint_from_json_text(read_file(last_path));
        const Checkpoint best = checkpoint_from_json_text(read_file(best_path));
        result = train(ds, cfg, &last, &best, stop_after);
    } else {
        write_file(log_path, "");  // fresh run truncates any previous log
        result = train(ds, cfg, nullptr, nullptr, stop_after);
    }

    std::string log_chunk;
    for (const std::string& line : result.epoch_log) log_chunk += line + "\n";
    append_file(log_path, log_chunk);
    write_file(last_path, checkpoint_to_json_text(result.last));
    write_file(best_path, checkpoint_to_json_text(result.best));
    write_file((dir / "metrics.json").string(), metrics_to_json_text(result.final_test));
    write_file((dir / "metrics.csv").string(), metrics_to_csv_text(result.final_test));

    std::cout << "trained " << result.last.epoch << " epochs; best epoch "
              << result.best.best_epoch << " (val f1_mean "
              << format_double(result.best.best_f1_mean) << ")\n"
              << "test: action_top1 " << format_double(result.final_test.action_top1)
              << ", f1_mean " << format_double(result.final_test.f1_mean) << "\n";
    return 0;
}

Vec read_per_class_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw parse_error("cannot open: " + path);
    Vec values;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        try {
            std::size_t used = 0;
            values.push_back(std::stod(line, &used));
            if (used != line.size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw parse_error(path + ":" + std::to_string(line_no) + ": expected one number per line");
        }
    }
    return values;
}

std::string per_class_csv(const Vec& acc) {
    std::string out;
    for (double v : acc) out += format_double(v) + "\n";
    return out;
}

int cmd_eval(const std::string& data_path, const std::string& ckpt_path, const std::string& split,
             const std::string& baseline_path, const std::string& fusion_name,
             const std::string& out_dir) {
    const Dataset ds = load_dataset(data_path);
    const Checkpoint ckpt = checkpoint_from_json_text(read_file(ckpt_path));
    const Fusion fusion = [&] {
        if (fusion_name == "prob_mean") return Fusion::prob_mean;
        if (fusion_name == "logit_sum") return Fusion::logit_sum;
        throw parse_error("--fusion: expected prob_mean or logit_sum");
    }();

    const SplitPredictions preds =
        predict_split(ds, split_from_name(split), ckpt.head_a, ckpt.head_b, ckpt.bank, fusion);
    const MetricsReport report = evaluate(preds.fused, preds.gt, ds.tree);
    const MetricsReport report_a = evaluate(preds.a, preds.gt, ds.tree);
    const MetricsReport report_b = evaluate(preds.b, preds.gt, ds.tree);

    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    write_file((dir / "metrics.json").string(), metrics_to_json_text(report));
    write_file((dir / "metrics.csv").string(), metrics_to_csv_text(report));
    write_file((dir / "per_class_acc.csv").string(), per_class_csv(report.per_class_action_accuracy));

    std::cout << "split " << split << ": stream_a top1 " << format_double(report_a.action_top1)
              << ", stream_b top1 " << format_double(report_b.action_top1) << ", fused top1 "
              << format_double(report.action_top1) << ", f1_mean " << format_double(report.f1_mean)
              << "\n";

    if (!baseline_path.empty()) {
        const Vec baseline = read_per_class_csv(baseline_path);
        if (baseline.size() != report.per_class_action_accuracy.size()) {
            throw parse_error("--baseline: expected " +
                              std::to_string(report.per_class_action_accuracy.size()) +
                              " per-class values, got " + std::to_string(baseline.size()));
        }
        const DifficultyReport diff = difficulty_split(baseline, report.per_class_action_accuracy);
        std::ostringstream os;
        const char* band_names[] = {"hard", "medium", "easy"};
        os << "{\n";
        for (int b = 0; b < 3; ++b) {
            os << "  \"" << band_names[b] << "\": {\"classes\": " << diff.counts[b]
               << ", \"baseline_mean\": " << format_double(diff.baseline_mean[b])
               << ", \"method_mean\": " << format_double(diff.method_mean[b])
               << ", \"delta\": " << format_double(diff.delta[b]) << "}" << (b < 2 ? "," : "")
               << "\n";
        }
        os << "}\n";
        write_file((dir / "difficulty.json").string(), os.str());
        std::cout << os.str();
    }
    return 0;
}

int cmd_ablate(const std::string& data_path, const std::string& config_path,
               const std::string& sweep, int seeds, const std::string& out_path) {
    const TrainConfig base = train_config_from_kv(load_kv_file(config_path));
    const Dataset ds = load_dataset(data_path);

    const auto eq = sweep.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 >= sweep.size()) {
        throw parse_error("--sweep: expected param=v1,v2,...");
    }
    const std::string param = sweep.substr(0, eq);
    std::vector<std::string> values;
    {
        std::string cur;
        for (char c : sweep.substr(eq + 1)) {
            if (c == ',') {
                values.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        values.push_back(cur);
    }

    std::vector<AblationRow> rows;
    for (const std::string& value : values) {
        MetricsReport mean;
        for (int s = 0; s < seeds; ++s) {
            TrainConfig cfg = base;
            apply_sweep_value(cfg, param, value);
            cfg.seed = base.seed + static_cast<std::uint64_t>(s);
            const TrainResult run = train(ds, cfg);
            const MetricsReport& r = run.final_test;
            mean.body_top1 += r.body_top1;
            mean.action_top1 += r.action_top1;
            mean.action_top5 += r.action_top5;
            mean.f1_macro_body += r.f1_macro_body;
            mean.f1_micro_body += r.f1_micro_body;
            mean.f1_macro_action += r.f1_macro_action;
            mean.f1_micro_action += r.f1_micro_action;
            mean.f1_mean += r.f1_mean;
        }
        const double inv = 1.0 / seeds;
        mean.body_top1 *= inv;
        mean.action_top1 *= inv;
        mean.action_top5 *= inv;
        mean.f1_macro_body *= inv;
        mean.f1_micro_body *= inv;
        mean.f1_macro_action *= inv;
        mean.f1_micro_action *= inv;
        mean.f1_mean *= inv;

        AblationRow row;
        if (param == "alpha") {
            std::vector<std::string> parts;
            std::string cur;
            for (char c : value) {
                if (c == ':') {
                    parts.push_back(cur);
                    cur.clear();
                } else {
                    cur += c;
                }
            }
            parts.push_back(cur);
            if (parts.size() != 3) throw parse_error("--sweep alpha: expected v1:v2:v3 tuples");
            row.config_cols = {{"alpha1", parts[0]}, {"alpha2", parts[1]}, {"alpha3", parts[2]}};
        } else {
            row.config_cols = {{param, value}};
        }
        row.report = mean;
        rows.push_back(std::move(row));
        std::cout << "swept " << param << "=" << value << ": action_top1 "
                  << format_double(mean.action_top1) << ", f1_mean " << format_double(mean.f1_mean)
                  << "\n";
    }

    const AblationTable table = ablation_table(rows);
    write_file(out_path, table.csv);
    std::cout << table.text;
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

int cmd_gradcheck(int seeds, double tolerance, double h) {
    const CertificationReport report = run_gradient_certification(seeds, tolerance, h);
    for (const CertificationCase& c : report.cases) {
        std::cout << (c.passed ? "PASS" : "FAIL") << " " << c.name << " max_rel_error "
                  << format_double(c.max_rel_error) << " (tolerance " << format_double(c.tolerance)
                  << ")\n";
    }
    return report.all_passed ? 0 : 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"prototype-calibrated hierarchical action recognition toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_path, data_path, out_dir = ".", ckpt_path;
    std::string split = "test", baseline_path, fusion_name = "prob_mean", sweep;
    bool resume = false;
    int stop_after = 0;
    int seeds = 20;
    int ablate_seeds = 1;
    double tolerance = 1e-4, h = 1e-5;

    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
    gen->add_option("--config", config_path, "synth config file")->required();
    gen->add_option("--out", out_path, "output dataset path")->required();

    auto* train_cmd = app.add_subcommand("train", "train on a dataset");
    train_cmd->add_option("--data", data_path, "dataset path")->required();
    train_cmd->add_option("--config", config_path, "train config file")->required();
    train_cmd->add_option("--out-dir", out_dir, "output directory")->required();
    train_cmd->add_flag("--resume", resume, "resume from checkpoints in --out-dir");
    train_cmd->add_option("--stop-after", stop_after,
                          "stop at this epoch boundary (resume later with --resume)");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    eval_cmd->add_option("--data", data_path, "dataset path")->required();
    eval_cmd->add_option("--checkpoint", ckpt_path, "checkpoint path")->required();
    eval_cmd->add_option("--split", split, "train|val|test (default test)");
    eval_cmd->add_option("--baseline", baseline_path,
                         "per-class accuracy csv defining difficulty bands");
    eval_cmd->add_option("--fusion", fusion_name, "prob_mean|logit_sum");
    eval_cmd->add_option("--out-dir", out_dir, "report directory (default .)");

    auto* ablate_cmd = app.add_subcommand("ablate", "hyperparameter sweep");
    ablate_cmd->add_option("--data", data_path, "dataset path")->required();
    ablate_cmd->add_option("--config", config_path, "base train config file")->required();
    ablate_cmd->add_option("--sweep", sweep, "param=v1,v2,... (alpha uses v1:v2:v3 tuples)")
        ->required();
    ablate_cmd->add_option("--seeds", ablate_seeds, "seeds per sweep point (default 1)");
    ablate_cmd->add_option("--out", out_path, "output csv path")->required();

    auto* gc = app.add_subcommand("gradcheck", "certify all analytic gradients");
    gc->add_option("--seeds", seeds, "random instances per case (default 20)");
    gc->add_option("--tolerance", tolerance, "max relative error (default 1e-4)");
    gc->add_option("--step", h, "finite-difference step (default 1e-5)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) return cmd_gen(config_path, out_path);
        if (train_cmd->parsed()) {
            return cmd_train(data_path, config_path, out_dir, resume, stop_after);
        }
        if (eval_cmd->parsed()) {
            return cmd_eval(data_path, ckpt_path, split, baseline_path, fusion_name, out_dir);
        }
        if (ablate_cmd->parsed()) {
            return cmd_ablate(data_path, config_path, sweep, ablate_seeds, out_path);
        }
        if (gc->parsed()) return cmd_gradcheck(seeds, tolerance, h);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
