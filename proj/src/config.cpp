#include "pcan/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "pcan/common.hpp"

namespace pcan {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

bool KvDoc::has(const std::string& key) const {
    for (const auto& [k, _] : entries) {
        if (k == key) return true;
    }
    return false;
}

const std::string& KvDoc::raw(const std::string& key) const {
    for (const auto& [k, v] : entries) {
        if (k == key) return v;
    }
    throw parse_error("missing config key: " + key);
}

namespace {

double parse_double_or_throw(const std::string& text, const std::string& key) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw parse_error("config key '" + key + "': expected a number, got '" + text + "'");
    }
}

std::vector<std::string> split_array(const std::string& raw_text, const std::string& key) {
    std::string s = raw_text;
    if (s.size() < 2 || s.front() != '[' || s.back() != ']') {
        throw parse_error("config key '" + key + "': expected an array [..], got '" + raw_text + "'");
    }
    s = s.substr(1, s.size() - 2);
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty() || !parts.empty()) parts.push_back(cur);
    for (std::string& p : parts) {
        const auto b = p.find_first_not_of(" \t");
        const auto e = p.find_last_not_of(" \t");
        p = b == std::string::npos ? std::string() : p.substr(b, e - b + 1);
        if (p.empty()) throw parse_error("config key '" + key + "': empty array element");
    }
    return parts;
}

} // namespace

double KvDoc::get_double(const std::string& key) const { return parse_double_or_throw(raw(key), key); }

int KvDoc::get_int(const std::string& key) const {
    const std::string& text = raw(key);
    int v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        throw parse_error("config key '" + key + "': expected an integer, got '" + text + "'");
    }
    return v;
}

std::uint64_t KvDoc::get_u64(const std::string& key) const {
    const std::string& text = raw(key);
    std::uint64_t v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        throw parse_error("config key '" + key + "': expected an unsigned integer, got '" + text + "'");
    }
    return v;
}

bool KvDoc::get_bool(const std::string& key) const {
    const std::string& text = raw(key);
    if (text == "true") return true;
    if (text == "false") return false;
    throw parse_error("config key '" + key + "': expected true or false, got '" + text + "'");
}

std::string KvDoc::get_string(const std::string& key) const {
    const std::string& text = raw(key);
    if (text.size() >= 2 && text.front() == '"' && text.back() == '"') {
        return text.substr(1, text.size() - 2);
    }
    return text;
}

std::vector<double> KvDoc::get_double_list(const std::string& key) const {
    std::vector<double> out;
    for (const std::string& p : split_array(raw(key), key)) out.push_back(parse_double_or_throw(p, key));
    return out;
}

std::vector<int> KvDoc::get_int_list(const std::string& key) const {
    std::vector<int> out;
    for (const std::string& p : split_array(raw(key), key)) {
        int v = 0;
        const auto res = std::from_chars(p.data(), p.data() + p.size(), v);
        if (res.ec != std::errc() || res.ptr != p.data() + p.size()) {
            throw parse_error("config key '" + key + "': expected integer array element, got '" + p + "'");
        }
        out.push_back(v);
    }
    return out;
}

KvDoc parse_kv_text(const std::string& text, const std::string& origin) {
    KvDoc doc;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);

        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw parse_error(origin + ":" + std::to_string(line_no) + ": expected key = value");
        }
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        const auto kb = key.find_first_not_of(" \t");
        const auto ke = key.find_last_not_of(" \t");
        key = kb == std::string::npos ? std::string() : key.substr(kb, ke - kb + 1);
        const auto vb = value.find_first_not_of(" \t");
        const auto ve = value.find_last_not_of(" \t");
        value = vb == std::string::npos ? std::string() : value.substr(vb, ve - vb + 1);
        if (key.empty()) {
            throw parse_error(origin + ":" + std::to_string(line_no) + ": empty key");
        }
        if (value.empty()) {
            throw parse_error(origin + ":" + std::to_string(line_no) + ": empty value for key '" + key + "'");
        }
        if (doc.has(key)) {
            throw parse_error(origin + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
        }
        doc.entries.emplace_back(std::move(key), std::move(value));
    }
    return doc;
}

KvDoc load_kv_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw parse_error("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_kv_text(buf.str(), path);
}

namespace {

void check_known_keys(const KvDoc& doc, const std::vector<std::string>& known) {
    for (const auto& [k, _] : doc.entries) {
        bool ok = false;
        for (const std::string& name : known) {
            if (k == name) {
                ok = true;
                break;
            }
        }
        if (!ok) throw parse_error("unknown config key: " + k);
    }
}

HpMode hp_mode_from(const std::string& s) {
    if (s == "tree") return HpMode::tree;
    if (s == "concat") return HpMode::concat;
    throw parse_error("config key 'hp_mode': expected tree or concat, got '" + s + "'");
}

FpSign fp_sign_from(const std::string& s) {
    if (s == "paper") return FpSign::paper;
    if (s == "repel") return FpSign::repel;
    throw parse_error("config key 'fp_sign': expected paper or repel, got '" + s + "'");
}

Fusion fusion_from(const std::string& s) {
    if (s == "prob_mean") return Fusion::prob_mean;
    if (s == "logit_sum") return Fusion::logit_sum;
    throw parse_error("config key 'fusion': expected prob_mean or logit_sum, got '" + s + "'");
}

} // namespace

TrainConfig train_config_from_kv(const KvDoc& doc) {
    check_known_keys(doc, {"lr", "momentum", "weight_decay", "batch_size", "epochs",
                           "lr_drop_epochs", "seed", "lambda", "rho", "tau", "alpha", "beta",
                           "gamma_a", "gamma_b", "fp_sign", "hp_mode", "fusion",
                           "pda_updates_prototypes", "warmup_epochs", "use_hp", "use_pcc",
                           "use_pda", "use_rectify"});
    TrainConfig cfg;
    if (doc.has("lr")) cfg.lr = doc.get_double("lr");
    if (doc.has("momentum")) cfg.momentum = doc.get_double("momentum");
    if (doc.has("weight_decay")) cfg.weight_decay = doc.get_double("weight_decay");
    if (doc.has("batch_size")) cfg.batch_size = doc.get_int("batch_size");
    if (doc.has("epochs")) cfg.epochs = doc.get_int("epochs");
    if (doc.has("lr_drop_epochs")) cfg.lr_drop_epochs = doc.get_int_list("lr_drop_epochs");
    if (doc.has("seed")) cfg.seed = doc.get_u64("seed");
    if (doc.has("lambda")) cfg.hp.lambda = doc.get_double("lambda");
    if (doc.has("rho")) cfg.hp.rho = doc.get_double("rho");
    if (doc.has("tau")) cfg.hp.tau = doc.get_double("tau");
    if (doc.has("alpha")) {
        const auto a = doc.get_double_list("alpha");
        if (a.size() != 3) throw parse_error("config key 'alpha': expected 3 elements");
        cfg.hp.alpha = {a[0], a[1], a[2]};
    }
    if (doc.has("beta")) cfg.hp.beta = doc.get_double("beta");
    if (doc.has("gamma_a")) cfg.hp.gamma_a = doc.get_double("gamma_a");
    if (doc.has("gamma_b")) cfg.hp.gamma_b = doc.get_double("gamma_b");
    if (doc.has("fp_sign")) cfg.hp.fp_sign = fp_sign_from(doc.get_string("fp_sign"));
    if (doc.has("hp_mode")) cfg.hp_mode = hp_mode_from(doc.get_string("hp_mode"));
    if (doc.has("fusion")) cfg.fusion = fusion_from(doc.get_string("fusion"));
    if (doc.has("pda_updates_prototypes")) {
        cfg.pda_updates_prototypes = doc.get_bool("pda_updates_prototypes");
    }
    if (doc.has("warmup_epochs")) cfg.warmup_epochs = doc.get_int("warmup_epochs");
    if (doc.has("use_hp")) cfg.use_hp = doc.get_bool("use_hp");
    if (doc.has("use_pcc")) cfg.use_pcc = doc.get_bool("use_pcc");
    if (doc.has("use_pda")) cfg.use_pda = doc.get_bool("use_pda");
    if (doc.has("use_rectify")) cfg.use_rectify = doc.get_bool("use_rectify");
    cfg.validate();
    return cfg;
}

SynthConfig synth_config_from_kv(const KvDoc& doc) {
    check_known_keys(doc, {"n_body", "n_action", "d", "samples_per_class", "seed", "body_sep",
                           "action_sep", "noise_sigma", "stream_corr"});
    SynthConfig cfg;
    if (doc.has("n_body")) cfg.n_body = doc.get_int("n_body");
    if (doc.has("n_action")) cfg.n_action = doc.get_int("n_action");
    if (doc.has("d")) cfg.d = static_cast<std::size_t>(doc.get_int("d"));
    if (doc.has("samples_per_class")) cfg.samples_per_class = doc.get_int("samples_per_class");
    if (doc.has("seed")) cfg.seed = doc.get_u64("seed");
    if (doc.has("body_sep")) cfg.body_sep = doc.get_double("body_sep");
    if (doc.has("action_sep")) cfg.action_sep = doc.get_double("action_sep");
    if (doc.has("noise_sigma")) cfg.noise_sigma = doc.get_double("noise_sigma");
    if (doc.has("stream_corr")) cfg.stream_corr = doc.get_double("stream_corr");
    cfg.validate();
    return cfg;
}

std::string train_config_to_text(const TrainConfig& cfg) {
    std::ostringstream os;
    os << "lr = " << format_double(cfg.lr) << '\n';
    os << "momentum = " << format_double(cfg.momentum) << '\n';
    os << "weight_decay = " << format_double(cfg.weight_decay) << '\n';
    os << "batch_size = " << cfg.batch_size << '\n';
    os << "epochs = " << cfg.epochs << '\n';
    os << "lr_drop_epochs = [";
    for (std::size_t i = 0; i < cfg.lr_drop_epochs.size(); ++i) {
        os << (i ? ", " : "") << cfg.lr_drop_epochs[i];
    }
    os << "]\n";
    os << "seed = " << cfg.seed << '\n';
    os << "lambda = " << format_double(cfg.hp.lambda) << '\n';
    os << "rho = " << format_double(cfg.hp.rho) << '\n';
    os << "tau = " << format_double(cfg.hp.tau) << '\n';
    os << "alpha = [" << format_double(cfg.hp.alpha[0]) << ", " << format_double(cfg.hp.alpha[1])
       << ", " << format_double(cfg.hp.alpha[2]) << "]\n";
    os << "beta = " << format_double(cfg.hp.beta) << '\n';
    os << "gamma_a = " << format_double(cfg.hp.gamma_a) << '\n';
    os << "gamma_b = " << format_double(cfg.hp.gamma_b) << '\n';
    os << "fp_sign = " << (cfg.hp.fp_sign == FpSign::paper ? "paper" : "repel") << '\n';
    os << "hp_mode = " << (cfg.hp_mode == HpMode::tree ? "tree" : "concat") << '\n';
    os << "fusion = " << (cfg.fusion == Fusion::prob_mean ? "prob_mean" : "logit_sum") << '\n';
    os << "pda_updates_prototypes = " << (cfg.pda_updates_prototypes ? "true" : "false") << '\n';
    os << "warmup_epochs = " << cfg.warmup_epochs << '\n';
    os << "use_hp = " << (cfg.use_hp ? "true" : "false") << '\n';
    os << "use_pcc = " << (cfg.use_pcc ? "true" : "false") << '\n';
    os << "use_pda = " << (cfg.use_pda ? "true" : "false") << '\n';
    os << "use_rectify = " << (cfg.use_rectify ? "true" : "false") << '\n';
    return os.str();
}

std::string synth_config_to_text(const SynthConfig& cfg) {
    std::ostringstream os;
    os << "n_body = " << cfg.n_body << '\n';
    os << "n_action = " << cfg.n_action << '\n';
    os << "d = " << cfg.d << '\n';
    os << "samples_per_class = " << cfg.samples_per_class << '\n';
    os << "seed = " << cfg.seed << '\n';
    os << "body_sep = " << format_double(cfg.body_sep) << '\n';
    os << "action_sep = " << format_double(cfg.action_sep) << '\n';
    os << "noise_sigma = " << format_double(cfg.noise_sigma) << '\n';
    os << "stream_corr = " << format_double(cfg.stream_corr) << '\n';
    return os.str();
}

std::uint64_t train_config_hash(const TrainConfig& cfg) {
    return fnv1a64(train_config_to_text(cfg));
}

void apply_sweep_value(TrainConfig& cfg, const std::string& param, const std::string& value) {
    if (param == "alpha") {
        // colon-separated triple, e.g. 1:0.5:0.1
        std::array<double, 3> a{};
        std::size_t start = 0;
        for (int i = 0; i < 3; ++i) {
            const auto colon = value.find(':', start);
            const bool last = i == 2;
            if ((colon == std::string::npos) != last) {
                throw parse_error("sweep 'alpha': expected three colon-separated values, got '" +
                                  value + "'");
            }
            const std::string part = value.substr(start, last ? std::string::npos : colon - start);
            a[i] = parse_double_or_throw(part, "alpha");
            start = colon + 1;
        }
        cfg.hp.alpha = a;
        cfg.validate();
        return;
    }
    KvDoc doc;
    doc.entries.emplace_back(param, value);
    if (param == "lambda") cfg.hp.lambda = doc.get_double(param);
    else if (param == "rho") cfg.hp.rho = doc.get_double(param);
    else if (param == "tau") cfg.hp.tau = doc.get_double(param);
    else if (param == "beta") cfg.hp.beta = doc.get_double(param);
    else if (param == "gamma_a") cfg.hp.gamma_a = doc.get_double(param);
    else if (param == "gamma_b") cfg.hp.gamma_b = doc.get_double(param);
    else if (param == "lr") cfg.lr = doc.get_double(param);
    else if (param == "momentum") cfg.momentum = doc.get_double(param);
    else if (param == "weight_decay") cfg.weight_decay = doc.get_double(param);
    else if (param == "batch_size") cfg.batch_size = doc.get_int(param);
    else if (param == "epochs") cfg.epochs = doc.get_int(param);
    else if (param == "seed") cfg.seed = doc.get_u64(param);
    else if (param == "warmup_epochs") cfg.warmup_epochs = doc.get_int(param);
    else if (param == "fp_sign") cfg.hp.fp_sign = fp_sign_from(value);
    else if (param == "hp_mode") cfg.hp_mode = hp_mode_from(value);
    else if (param == "fusion") cfg.fusion = fusion_from(value);
    else if (param == "use_hp") cfg.use_hp = doc.get_bool(param);
    else if (param == "use_pcc") cfg.use_pcc = doc.get_bool(param);
    else if (param == "use_pda") cfg.use_pda = doc.get_bool(param);
    else if (param == "use_rectify") cfg.use_rectify = doc.get_bool(param);
    else throw parse_error("unknown sweep parameter: " + param);
    cfg.validate();
}

} // namespace pcan
