#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "pcan/partition.hpp"
#include "pcan/taxonomy.hpp"

namespace pcan {

struct MetricsReport {
    double body_top1 = 0.0;
    double action_top1 = 0.0;
    double action_top5 = 0.0;
    double f1_macro_body = 0.0;
    double f1_micro_body = 0.0;
    double f1_macro_action = 0.0;
    double f1_micro_action = 0.0;
    double f1_mean = 0.0;  // arithmetic mean of the four F1 fields
    Vec per_class_action_accuracy;  // recall per action class (0 when unseen)

    // Classes with zero true AND zero predicted instances; their per-class F1
    // is defined as 0 and they are surfaced here rather than silently folded in.
    std::vector<int> empty_body_classes;
    std::vector<int> empty_action_classes;
};

/// Fused-prediction evaluation. Top-5 ties break toward the lower class
/// index; micro-F1 is computed globally (for single-label data it equals
/// top-1 accuracy). Throws contract_error on an empty evaluation set.
MetricsReport evaluate(const BatchPredictions& preds, const std::vector<LabelPair>& gt,
                       const ActionTree& tree);

enum class Band { hard = 0, medium = 1, easy = 2 };

/// Banding is decided by the BASELINE accuracy alone: hard < 0.50,
/// medium in the closed interval [0.50, 0.60], easy > 0.60.
Band band_of(double baseline_acc);

struct DifficultyReport {
    std::vector<Band> bands;              // per action class
    std::array<int, 3> counts{};          // classes per band
    std::array<double, 3> baseline_mean{};  // 0 for an empty band (see counts)
    std::array<double, 3> method_mean{};
    std::array<double, 3> delta{};        // method - baseline
};

DifficultyReport difficulty_split(const Vec& baseline_per_class_acc,
                                  const Vec& method_per_class_acc);

/// One sweep row: the varied config values (in column order) plus the metrics.
struct AblationRow {
    std::vector<std::pair<std::string, std::string>> config_cols;
    MetricsReport report;
};

struct AblationTable {
    std::string csv;
    std::string text;  // aligned fixed-width rendering of the same rows
};

/// Emits the standard sweep layout: the swept parameter columns followed by
/// body_top1, action_top1, action_top5, f1_macro_body, f1_micro_body,
/// f1_macro_action, f1_micro_action, f1_mean.
AblationTable ablation_table(const std::vector<AblationRow>& rows);

std::string metrics_to_json_text(const MetricsReport& report);
std::string metrics_to_csv_text(const MetricsReport& report);

} // namespace pcan
