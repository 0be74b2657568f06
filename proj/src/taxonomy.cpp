#include "pcan/taxonomy.hpp"

#include <sstream>

#include <json.hpp>

#include "pcan/common.hpp"

namespace pcan {

std::string TreeValidation::describe() const {
    std::ostringstream os;
    for (const auto& v : violations) {
        os << v.rule;
        if (v.index >= 0) os << " (index " << v.index << ")";
        os << "; ";
    }
    return os.str();
}

TreeValidation validate_tree(const ActionTree& tree) {
    TreeValidation report;
    if (tree.n_body < 1) report.violations.push_back({"n_body must be >= 1", -1});
    if (tree.n_action < tree.n_body)
        report.violations.push_back({"n_action must be >= n_body", -1});
    if (static_cast<int>(tree.parent.size()) != tree.n_action) {
        report.violations.push_back({"parent map must be total over [0, n_action)", -1});
        return report;  // remaining checks need a total map
    }
    std::vector<int> child_count(std::max(tree.n_body, 0), 0);
    for (int a = 0; a < tree.n_action; ++a) {
        const int b = tree.parent[a];
        if (b < 0 || b >= tree.n_body) {
            report.violations.push_back({"parent out of body range", a});
        } else {
            ++child_count[b];
        }
    }
    for (int b = 0; b < tree.n_body; ++b) {
        if (child_count[b] == 0) report.violations.push_back({"body class has no child action", b});
    }
    return report;
}

int body_of(const ActionTree& tree, int action) {
    if (action < 0 || action >= tree.n_action) {
        throw contract_error("body_of: action index " + std::to_string(action) +
                             " out of range [0, " + std::to_string(tree.n_action) + ")");
    }
    return tree.parent[action];
}

bool consistent(const ActionTree& tree, const LabelPair& pair) {
    if (pair.action < 0 || pair.action >= tree.n_action) return false;
    return tree.parent[pair.action] == pair.body;
}

ActionTree make_even_tree(int n_body, int n_action) {
    if (n_body < 1 || n_action < n_body) {
        throw contract_error("make_even_tree: need n_body >= 1 and n_action >= n_body");
    }
    ActionTree tree;
    tree.n_body = n_body;
    tree.n_action = n_action;
    tree.parent.reserve(n_action);
    const int base = n_action / n_body;
    const int extra = n_action % n_body;
    for (int b = 0; b < n_body; ++b) {
        const int children = base + (b < extra ? 1 : 0);
        for (int c = 0; c < children; ++c) tree.parent.push_back(b);
    }
    return tree;
}

ActionTree tree_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(std::string("tree JSON: ") + e.what());
    }
    ActionTree tree;
    try {
        tree.n_body = j.at("n_body").get<int>();
        tree.n_action = j.at("n_action").get<int>();
        tree.parent = j.at("parent").get<std::vector<int>>();
        if (j.contains("body_names")) tree.body_names = j["body_names"].get<std::vector<std::string>>();
        if (j.contains("action_names")) tree.action_names = j["action_names"].get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(std::string("tree JSON fields: ") + e.what());
    }
    const TreeValidation check = validate_tree(tree);
    if (!check.ok()) throw parse_error("tree JSON violates invariants: " + check.describe());
    return tree;
}

std::string tree_to_json_text(const ActionTree& tree) {
    nlohmann::json j;
    j["n_body"] = tree.n_body;
    j["n_action"] = tree.n_action;
    j["parent"] = tree.parent;
    if (!tree.body_names.empty()) j["body_names"] = tree.body_names;
    if (!tree.action_names.empty()) j["action_names"] = tree.action_names;
    return j.dump();
}

} // namespace pcan
