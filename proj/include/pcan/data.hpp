#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pcan/numerics.hpp"
#include "pcan/taxonomy.hpp"

namespace pcan {

enum class Split { train, val, test };

const char* split_name(Split s);
Split split_from_name(const std::string& name);

struct Sample {
    Vec fa;  // stream-A feature
    Vec fb;  // stream-B feature
    LabelPair label;
    Split split = Split::train;
    bool operator==(const Sample&) const = default;
};

struct Dataset {
    ActionTree tree;
    std::size_t d = 0;
    std::vector<Sample> samples;

    std::vector<std::size_t> split_indices(Split s) const;
    bool operator==(const Dataset&) const = default;
};

/// Geometry knobs for the synthetic hierarchy. Body-class centers are unit
/// vectors with exact pairwise angle body_sep; each action center sits exactly
/// action_sep away from its body center along a random orthogonal direction,
/// so siblings crowd together while body groups stay apart. Per-stream noise
/// shares a common component controlled by stream_corr.
struct SynthConfig {
    int n_body = 7;
    int n_action = 52;
    std::size_t d = 64;
    int samples_per_class = 40;
    std::uint64_t seed = 0;
    double body_sep = 70.0;    // degrees, pairwise between body centers
    double action_sep = 14.0;  // degrees, sibling spread (the ambiguity knob)
    double noise_sigma = 0.07;
    double stream_corr = 0.5;

    void validate() const;  // throws contract_error / generation_error
};

/// Deterministic per seed. Samples are emitted action-class-major with a
/// 50/25/25 train/val/test split inside every class (rounded per class).
Dataset generate(const SynthConfig& cfg);

/// JSONL: line 1 is a header {format_version, d, tree, counts}; each further
/// line is one record {split, body, action, fa, fb}. Doubles round-trip
/// bit-exactly.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

} // namespace pcan
