#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pcan/data.hpp"
#include "pcan/trainer.hpp"

namespace pcan {

/// Flat key = value document (TOML-like subset): one assignment per line,
/// `#` comments, quoted strings, [a, b, c] arrays. Values are kept as raw
/// text; typed accessors parse on demand and name the key on failure.
struct KvDoc {
    std::vector<std::pair<std::string, std::string>> entries;

    bool has(const std::string& key) const;
    const std::string& raw(const std::string& key) const;  // throws parse_error if missing

    double get_double(const std::string& key) const;
    int get_int(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::string get_string(const std::string& key) const;
    std::vector<double> get_double_list(const std::string& key) const;
    std::vector<int> get_int_list(const std::string& key) const;
};

KvDoc parse_kv_text(const std::string& text, const std::string& origin = "<string>");
KvDoc load_kv_file(const std::string& path);

/// Builders reject unknown keys (typo protection); absent keys keep defaults.
TrainConfig train_config_from_kv(const KvDoc& doc);
SynthConfig synth_config_from_kv(const KvDoc& doc);

/// Canonical render: fixed key order, shortest round-trip float formatting.
/// parse(render(cfg)) == cfg, and the render is the hashing domain.
std::string train_config_to_text(const TrainConfig& cfg);
std::string synth_config_to_text(const SynthConfig& cfg);

std::uint64_t train_config_hash(const TrainConfig& cfg);

/// Applies one swept assignment (e.g. "lambda", "0.1" or "alpha", "1:0.5:0.1")
/// to a base config. Throws parse_error for unknown parameter names.
void apply_sweep_value(TrainConfig& cfg, const std::string& param, const std::string& value);

/// Shortest decimal text that round-trips the exact double.
std::string format_double(double v);

} // namespace pcan
