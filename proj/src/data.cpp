#include "pcan/data.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "pcan/common.hpp"

namespace pcan {

using nlohmann::json;

const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    throw contract_error("split_name: bad enum value");
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "val") return Split::val;
    if (name == "test") return Split::test;
    throw parse_error("unknown split name: " + name);
}

std::vector<std::size_t> Dataset::split_indices(Split s) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].split == s) idx.push_back(i);
    }
    return idx;
}

void SynthConfig::validate() const {
    if (n_body < 1) throw contract_error("SynthConfig: n_body must be >= 1");
    if (n_action < n_body) throw contract_error("SynthConfig: n_action must be >= n_body");
    if (samples_per_class < 1) throw contract_error("SynthConfig: samples_per_class must be >= 1");
    if (!(body_sep > 0.0 && body_sep <= 180.0)) {
        throw contract_error("SynthConfig: body_sep must be in (0, 180] degrees");
    }
    if (!(action_sep >= 0.0 && action_sep <= 180.0)) {
        throw contract_error("SynthConfig: action_sep must be in [0, 180] degrees");
    }
    if (!(noise_sigma > 0.0)) throw contract_error("SynthConfig: noise_sigma must be > 0");
    if (!(stream_corr >= 0.0 && stream_corr <= 1.0)) {
        throw contract_error("SynthConfig: stream_corr must be in [0, 1]");
    }
    if (d < static_cast<std::size_t>(n_body) + 1) {
        throw generation_error(
            "infeasible geometry: the body-center construction needs d >= n_body + 1 dimensions");
    }
    if (n_body > 1) {
        const double c = std::cos(body_sep * 3.14159265358979323846 / 180.0);
        const double s = -1.0 / static_cast<double>(n_body - 1);
        if (c < s) {
            std::ostringstream msg;
            msg << "infeasible geometry: " << n_body << " unit centers cannot all meet at "
                << body_sep << " degrees (pairwise cosine " << c << " below the simplex bound "
                << s << ")";
            throw generation_error(msg.str());
        }
    }
}

namespace {

constexpr double kPi = 3.14159265358979323846;

Vec gaussian_vec(std::size_t d, Rng& rng) {
    Vec v(d);
    for (double& x : v) x = rng.normal();
    return v;
}

// Draws a unit vector orthogonal to the span of `basis` (rows assumed
// orthonormal) by Gram-Schmidt on fresh Gaussian draws.
Vec draw_orthonormal_to(const std::vector<Vec>& basis, std::size_t d, Rng& rng) {
    for (int attempt = 0; attempt < 100; ++attempt) {
        Vec v = gaussian_vec(d, rng);
        for (const Vec& b : basis) {
            const double p = dot(v, b);
            for (std::size_t c = 0; c < d; ++c) v[c] -= p * b[c];
        }
        const double n = norm(v);
        if (n > 1e-6) {
            for (double& x : v) x /= n;
            return v;
        }
    }
    throw generation_error("could not draw an independent direction (dimension too small?)");
}

// Unit body centers with exact pairwise angle body_sep: blend a shared
// orthonormal direction g with regular-simplex directions v_i living in an
// orthonormal frame, c_i = a*g + b*v_i with a^2 + b^2 = 1 chosen so that
// c_i . c_j equals cos(body_sep).
std::vector<Vec> body_centers(const SynthConfig& cfg, Rng& rng) {
    const std::size_t d = cfg.d;
    const auto n = static_cast<std::size_t>(cfg.n_body);
    std::vector<Vec> frame;
    for (std::size_t i = 0; i < n + 1; ++i) frame.push_back(draw_orthonormal_to(frame, d, rng));

    if (n == 1) return {frame[0]};

    const double s = -1.0 / static_cast<double>(n - 1);
    const double cos_sep = std::cos(cfg.body_sep * kPi / 180.0);
    const double b2 = (1.0 - cos_sep) / (1.0 - s);
    const double a2 = 1.0 - b2;
    const double a = std::sqrt(std::max(0.0, a2));
    const double b = std::sqrt(std::max(0.0, b2));

    // Regular simplex in span{frame[1..n]}: basis directions minus centroid.
    const double simplex_scale = std::sqrt(static_cast<double>(n) / static_cast<double>(n - 1));
    std::vector<Vec> centers(n, Vec(d, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        Vec& c = centers[i];
        for (std::size_t k = 0; k < n; ++k) {
            const double coord = (k == i ? 1.0 : 0.0) - 1.0 / static_cast<double>(n);
            const double w = b * simplex_scale * coord;
            for (std::size_t col = 0; col < d; ++col) c[col] += w * frame[k + 1][col];
        }
        for (std::size_t col = 0; col < d; ++col) c[col] += a * frame[0][col];
    }
    return centers;
}

} // namespace

Dataset generate(const SynthConfig& cfg) {
    cfg.validate();
    Dataset ds;
    ds.tree = make_even_tree(cfg.n_body, cfg.n_action);
    ds.d = cfg.d;

    Rng rng(cfg.seed);
    const std::vector<Vec> bodies = body_centers(cfg, rng);

    const double phi = cfg.action_sep * kPi / 180.0;
    std::vector<Vec> actions(cfg.n_action);
    for (int a = 0; a < cfg.n_action; ++a) {
        const Vec& c = bodies[ds.tree.parent[a]];
        const Vec w = draw_orthonormal_to({c}, cfg.d, rng);
        Vec center(cfg.d);
        for (std::size_t col = 0; col < cfg.d; ++col) {
            center[col] = std::cos(phi) * c[col] + std::sin(phi) * w[col];
        }
        actions[a] = std::move(center);
    }

    const double w_shared = std::sqrt(cfg.stream_corr);
    const double w_own = std::sqrt(1.0 - cfg.stream_corr);
    const auto spc = static_cast<std::size_t>(cfg.samples_per_class);
    const auto n_train = static_cast<std::size_t>(std::lround(0.5 * cfg.samples_per_class));
    const auto n_val = static_cast<std::size_t>(std::lround(0.25 * cfg.samples_per_class));

    ds.samples.reserve(spc * static_cast<std::size_t>(cfg.n_action));
    for (int a = 0; a < cfg.n_action; ++a) {
        for (std::size_t s = 0; s < spc; ++s) {
            const Vec shared = gaussian_vec(cfg.d, rng);
            const Vec own_a = gaussian_vec(cfg.d, rng);
            const Vec own_b = gaussian_vec(cfg.d, rng);
            Sample sample;
            sample.fa.resize(cfg.d);
            sample.fb.resize(cfg.d);
            for (std::size_t col = 0; col < cfg.d; ++col) {
                const double base = actions[a][col];
                const double mixed = w_shared * shared[col];
                sample.fa[col] = base + cfg.noise_sigma * (mixed + w_own * own_a[col]);
                sample.fb[col] = base + cfg.noise_sigma * (mixed + w_own * own_b[col]);
            }
            sample.label = {ds.tree.parent[a], a};
            sample.split = s < n_train ? Split::train : (s < n_train + n_val ? Split::val : Split::test);
            ds.samples.push_back(std::move(sample));
        }
    }
    return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw parse_error("cannot open for writing: " + path);

    std::size_t n_train = 0, n_val = 0, n_test = 0;
    for (const Sample& s : ds.samples) {
        if (s.split == Split::train) ++n_train;
        else if (s.split == Split::val) ++n_val;
        else ++n_test;
    }
    json header = {
        {"format_version", 1},
        {"d", ds.d},
        {"tree", json::parse(tree_to_json_text(ds.tree))},
        {"counts", {{"total", ds.samples.size()}, {"train", n_train}, {"val", n_val}, {"test", n_test}}},
    };
    out << header.dump() << '\n';

    for (const Sample& s : ds.samples) {
        json rec = {
            {"split", split_name(s.split)},
            {"body", s.label.body},
            {"action", s.label.action},
            {"fa", s.fa},
            {"fb", s.fb},
        };
        out << rec.dump() << '\n';
    }
    if (!out) throw parse_error("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw parse_error("cannot open: " + path);

    std::string line;
    if (!std::getline(in, line)) throw parse_error(path + ": empty file, missing header");

    Dataset ds;
    std::size_t expect_total = 0, expect_train = 0, expect_val = 0, expect_test = 0;
    try {
        const json header = json::parse(line);
        if (header.at("format_version").get<int>() != 1) {
            throw parse_error(path + ":1: unsupported format_version");
        }
        ds.d = header.at("d").get<std::size_t>();
        ds.tree = tree_from_json_text(header.at("tree").dump());
        const json& counts = header.at("counts");
        expect_total = counts.at("total").get<std::size_t>();
        expect_train = counts.at("train").get<std::size_t>();
        expect_val = counts.at("val").get<std::size_t>();
        expect_test = counts.at("test").get<std::size_t>();
    } catch (const parse_error&) {
        throw;
    } catch (const std::exception& e) {
        throw parse_error(path + ":1: malformed header: " + e.what());
    }

    std::size_t line_no = 1;
    std::size_t n_train = 0, n_val = 0, n_test = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        Sample s;
        try {
            const json rec = json::parse(line);
            s.split = split_from_name(rec.at("split").get<std::string>());
            s.label.body = rec.at("body").get<int>();
            s.label.action = rec.at("action").get<int>();
            s.fa = rec.at("fa").get<Vec>();
            s.fb = rec.at("fb").get<Vec>();
        } catch (const std::exception& e) {
            throw parse_error(path + ":" + std::to_string(line_no) + ": malformed record: " + e.what());
        }
        if (s.fa.size() != ds.d || s.fb.size() != ds.d) {
            throw parse_error(path + ":" + std::to_string(line_no) + ": feature length " +
                              std::to_string(s.fa.size() != ds.d ? s.fa.size() : s.fb.size()) +
                              " does not match header d=" + std::to_string(ds.d));
        }
        if (!consistent(ds.tree, s.label)) {
            throw parse_error(path + ":" + std::to_string(line_no) +
                              ": label is not consistent with the action tree");
        }
        if (s.split == Split::train) ++n_train;
        else if (s.split == Split::val) ++n_val;
        else ++n_test;
        ds.samples.push_back(std::move(s));
    }

    if (ds.samples.size() != expect_total || n_train != expect_train || n_val != expect_val ||
        n_test != expect_test) {
        throw parse_error(path + ": record counts do not match header (truncated file?): got " +
                          std::to_string(ds.samples.size()) + ", header says " +
                          std::to_string(expect_total));
    }
    return ds;
}

} // namespace pcan
