#pragma once

#include <string>
#include <vector>

namespace pcan {

/// Two-level label hierarchy: every action-level class has exactly one
/// parent body-level class. Immutable after construction; shared read-only.
struct ActionTree {
    int n_body = 0;
    int n_action = 0;
    std::vector<int> parent;              // action index -> body index, length n_action
    std::vector<std::string> body_names;  // optional display metadata
    std::vector<std::string> action_names;
    bool operator==(const ActionTree&) const = default;
};

struct LabelPair {
    int body = 0;
    int action = 0;
    bool operator==(const LabelPair&) const = default;
};

struct TreeViolation {
    std::string rule;
    int index = -1;  // offending class index, -1 when structural
};

struct TreeValidation {
    std::vector<TreeViolation> violations;
    bool ok() const { return violations.empty(); }
    std::string describe() const;
};

// Checks every ActionTree invariant. Violations are reported as data, not thrown.
TreeValidation validate_tree(const ActionTree& tree);

// Parent lookup; throws contract_error on an out-of-range action index.
int body_of(const ActionTree& tree, int action);

// True iff tree.parent[pair.action] == pair.body (action in range).
bool consistent(const ActionTree& tree, const LabelPair& pair);

// Builds a tree with n_action children spread over n_body parents as evenly
// as possible (earlier bodies take the remainder). Used by the synthetic
// generator and by tests.
ActionTree make_even_tree(int n_body, int n_action);

// Standalone JSON tree document: {n_body, n_action, parent, body_names, action_names}.
ActionTree tree_from_json_text(const std::string& text);
std::string tree_to_json_text(const ActionTree& tree);

} // namespace pcan
