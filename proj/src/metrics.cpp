#include "pcan/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "pcan/common.hpp"

namespace pcan {

namespace {

struct F1Stats {
    double macro = 0.0;
    double micro = 0.0;
    std::vector<int> empty_classes;
};

// Standard per-class precision/recall with the 0/0 := 0 convention; classes
// that never occur (no true, no predicted) get F1 = 0 and are flagged.
F1Stats f1_scores(const std::vector<int>& gt, const std::vector<int>& pred, std::size_t n_class) {
    std::vector<std::size_t> tp(n_class, 0), fp(n_class, 0), fn(n_class, 0);
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (gt[i] == pred[i]) {
            ++tp[gt[i]];
        } else {
            ++fn[gt[i]];
            ++fp[pred[i]];
        }
    }
    F1Stats out;
    double macro_sum = 0.0;
    std::size_t tp_all = 0, fp_all = 0, fn_all = 0;
    for (std::size_t k = 0; k < n_class; ++k) {
        if (tp[k] + fp[k] + fn[k] == 0) out.empty_classes.push_back(static_cast<int>(k));
        const double p = tp[k] + fp[k] > 0 ? static_cast<double>(tp[k]) / (tp[k] + fp[k]) : 0.0;
        const double r = tp[k] + fn[k] > 0 ? static_cast<double>(tp[k]) / (tp[k] + fn[k]) : 0.0;
        macro_sum += p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
        tp_all += tp[k];
        fp_all += fp[k];
        fn_all += fn[k];
    }
    out.macro = macro_sum / static_cast<double>(n_class);
    const double p_all = tp_all + fp_all > 0 ? static_cast<double>(tp_all) / (tp_all + fp_all) : 0.0;
    const double r_all = tp_all + fn_all > 0 ? static_cast<double>(tp_all) / (tp_all + fn_all) : 0.0;
    out.micro = p_all + r_all > 0.0 ? 2.0 * p_all * r_all / (p_all + r_all) : 0.0;
    return out;
}

bool in_top5(const double* probs, std::size_t n, int gt) {
    // Count classes strictly more probable than gt, plus equal-probability
    // classes with a lower index: gt is in the top five iff fewer than five
    // classes rank ahead of it under (prob desc, index asc).
    const double p_gt = probs[gt];
    std::size_t ahead = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (static_cast<int>(k) == gt) continue;
        if (probs[k] > p_gt || (probs[k] == p_gt && static_cast<int>(k) < gt)) ++ahead;
    }
    return ahead < 5;
}

} // namespace

MetricsReport evaluate(const BatchPredictions& preds, const std::vector<LabelPair>& gt,
                       const ActionTree& tree) {
    const std::size_t n = gt.size();
    if (n == 0) throw contract_error("evaluate: empty evaluation set");
    if (preds.batch_size() != n) throw contract_error("evaluate: prediction/label length mismatch");
    const auto nb = static_cast<std::size_t>(tree.n_body);
    const auto na = static_cast<std::size_t>(tree.n_action);
    if (preds.action_probs.cols != na || preds.body_probs.cols != nb) {
        throw contract_error("evaluate: prediction width does not match tree");
    }

    MetricsReport report;
    std::vector<int> gt_body(n), gt_action(n);
    std::size_t body_hits = 0, action_hits = 0, top5_hits = 0;
    std::vector<std::size_t> class_total(na, 0), class_hits(na, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (!consistent(tree, gt[i])) throw contract_error("evaluate: label inconsistent with tree");
        gt_body[i] = gt[i].body;
        gt_action[i] = gt[i].action;
        if (preds.body_pred[i] == gt[i].body) ++body_hits;
        const bool hit = preds.action_pred[i] == gt[i].action;
        if (hit) ++action_hits;
        if (in_top5(preds.action_probs.row(i), na, gt[i].action)) ++top5_hits;
        ++class_total[gt[i].action];
        if (hit) ++class_hits[gt[i].action];
    }

    const double inv_n = 1.0 / static_cast<double>(n);
    report.body_top1 = static_cast<double>(body_hits) * inv_n;
    report.action_top1 = static_cast<double>(action_hits) * inv_n;
    report.action_top5 = static_cast<double>(top5_hits) * inv_n;

    const F1Stats body = f1_scores(gt_body, preds.body_pred, nb);
    const F1Stats action = f1_scores(gt_action, preds.action_pred, na);
    report.f1_macro_body = body.macro;
    report.f1_micro_body = body.micro;
    report.f1_macro_action = action.macro;
    report.f1_micro_action = action.micro;
    report.f1_mean = (report.f1_macro_body + report.f1_micro_body + report.f1_macro_action +
                      report.f1_micro_action) /
                     4.0;
    report.empty_body_classes = body.empty_classes;
    report.empty_action_classes = action.empty_classes;

    report.per_class_action_accuracy.assign(na, 0.0);
    for (std::size_t k = 0; k < na; ++k) {
        if (class_total[k] > 0) {
            report.per_class_action_accuracy[k] =
                static_cast<double>(class_hits[k]) / static_cast<double>(class_total[k]);
        }
    }
    return report;
}

Band band_of(double baseline_acc) {
    if (baseline_acc < 0.50) return Band::hard;
    if (baseline_acc <= 0.60) return Band::medium;
    return Band::easy;
}

DifficultyReport difficulty_split(const Vec& baseline_per_class_acc,
                                  const Vec& method_per_class_acc) {
    if (baseline_per_class_acc.size() != method_per_class_acc.size()) {
        throw contract_error("difficulty_split: list length mismatch");
    }
    DifficultyReport report;
    std::array<double, 3> base_sum{}, method_sum{};
    report.bands.reserve(baseline_per_class_acc.size());
    for (std::size_t k = 0; k < baseline_per_class_acc.size(); ++k) {
        const Band band = band_of(baseline_per_class_acc[k]);
        report.bands.push_back(band);
        const auto b = static_cast<std::size_t>(band);
        ++report.counts[b];
        base_sum[b] += baseline_per_class_acc[k];
        method_sum[b] += method_per_class_acc[k];
    }
    for (std::size_t b = 0; b < 3; ++b) {
        if (report.counts[b] > 0) {
            report.baseline_mean[b] = base_sum[b] / report.counts[b];
            report.method_mean[b] = method_sum[b] / report.counts[b];
        }
        report.delta[b] = report.method_mean[b] - report.baseline_mean[b];
    }
    return report;
}

namespace {

const char* kMetricCols[] = {"body_top1",       "action_top1",     "action_top5",
                             "f1_macro_body",   "f1_micro_body",   "f1_macro_action",
                             "f1_micro_action", "f1_mean"};

std::array<double, 8> metric_values(const MetricsReport& r) {
    return {r.body_top1,     r.action_top1,     r.action_top5,     r.f1_macro_body,
            r.f1_micro_body, r.f1_macro_action, r.f1_micro_action, r.f1_mean};
}

std::string format_metric(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << v;
    return os.str();
}

} // namespace

AblationTable ablation_table(const std::vector<AblationRow>& rows) {
    if (rows.empty()) throw contract_error("ablation_table: need at least one run");
    const auto& cols = rows.front().config_cols;
    for (const AblationRow& row : rows) {
        if (row.config_cols.size() != cols.size()) {
            throw contract_error("ablation_table: rows sweep different parameters");
        }
    }

    std::vector<std::vector<std::string>> cells;
    std::vector<std::string> header;
    for (const auto& [name, _] : cols) header.push_back(name);
    for (const char* name : kMetricCols) header.push_back(name);
    cells.push_back(header);
    for (const AblationRow& row : rows) {
        std::vector<std::string> line;
        for (const auto& [_, value] : row.config_cols) line.push_back(value);
        for (double v : metric_values(row.report)) line.push_back(format_metric(v));
        cells.push_back(std::move(line));
    }

    std::ostringstream csv;
    for (const auto& line : cells) {
        for (std::size_t c = 0; c < line.size(); ++c) csv << (c ? "," : "") << line[c];
        csv << '\n';
    }

    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& line : cells) {
        for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
    }
    std::ostringstream text;
    for (const auto& line : cells) {
        for (std::size_t c = 0; c < line.size(); ++c) {
            text << (c ? "  " : "") << std::setw(static_cast<int>(width[c])) << std::right << line[c];
        }
        text << '\n';
    }
    return {csv.str(), text.str()};
}

std::string metrics_to_json_text(const MetricsReport& report) {
    nlohmann::json j = {
        {"body_top1", report.body_top1},
        {"action_top1", report.action_top1},
        {"action_top5", report.action_top5},
        {"f1_macro_body", report.f1_macro_body},
        {"f1_micro_body", report.f1_micro_body},
        {"f1_macro_action", report.f1_macro_action},
        {"f1_micro_action", report.f1_micro_action},
        {"f1_mean", report.f1_mean},
        {"per_class_action_accuracy", report.per_class_action_accuracy},
        {"empty_body_classes", report.empty_body_classes},
        {"empty_action_classes", report.empty_action_classes},
    };
    return j.dump(2) + "\n";
}

std::string metrics_to_csv_text(const MetricsReport& report) {
    std::ostringstream os;
    for (std::size_t c = 0; c < 8; ++c) os << (c ? "," : "") << kMetricCols[c];
    os << '\n';
    const auto values = metric_values(report);
    os << std::setprecision(17);
    for (std::size_t c = 0; c < 8; ++c) os << (c ? "," : "") << values[c];
    os << '\n';
    return os.str();
}

} // namespace pcan
