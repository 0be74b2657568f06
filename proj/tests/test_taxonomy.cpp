#include "doctest.h"

#include "pcan/common.hpp"
#include "pcan/taxonomy.hpp"

using namespace pcan;

TEST_SUITE("taxonomy") {

TEST_CASE("body_of is a table lookup") {
    ActionTree tree;
    tree.n_body = 2;
    tree.n_action = 3;
    tree.parent = {0, 0, 1};
    CHECK(body_of(tree, 2) == 1);
    CHECK(body_of(tree, 0) == 0);
    CHECK_THROWS_AS((void)body_of(tree, 99), contract_error);
    CHECK_THROWS_AS((void)body_of(tree, -1), contract_error);
}

TEST_CASE("make_even_tree spreads children evenly") {
    const ActionTree tree = make_even_tree(7, 52);
    CHECK(tree.n_body == 7);
    CHECK(tree.n_action == 52);
    CHECK(validate_tree(tree).ok());
    std::vector<int> children(7, 0);
    for (int a = 0; a < 52; ++a) ++children[tree.parent[a]];
    // 52 = 7*7 + 3: the first three bodies take one extra child
    for (int b = 0; b < 7; ++b) CHECK(children[b] == (b < 3 ? 8 : 7));
    for (int a = 1; a < 52; ++a) CHECK(tree.parent[a - 1] <= tree.parent[a]);
}

TEST_CASE("validate_tree reports violations as data") {
    ActionTree bad;
    bad.n_body = 2;
    bad.n_action = 3;
    bad.parent = {0, 0, 7};  // out of range
    const TreeValidation v1 = validate_tree(bad);
    CHECK(!v1.ok());
    CHECK(!v1.describe().empty());

    ActionTree childless;
    childless.n_body = 2;
    childless.n_action = 2;
    childless.parent = {0, 0};  // body 1 has no children
    CHECK(!validate_tree(childless).ok());

    ActionTree short_parent;
    short_parent.n_body = 1;
    short_parent.n_action = 2;
    short_parent.parent = {0};  // wrong length
    CHECK(!validate_tree(short_parent).ok());

    CHECK(validate_tree(make_even_tree(1, 1)).ok());
    CHECK(validate_tree(make_even_tree(3, 11)).ok());
}

TEST_CASE("validated trees give consistent pairs for every action") {
    const ActionTree tree = make_even_tree(4, 13);
    REQUIRE(validate_tree(tree).ok());
    for (int a = 0; a < tree.n_action; ++a) {
        CHECK(consistent(tree, LabelPair{body_of(tree, a), a}));
    }
    CHECK(!consistent(tree, LabelPair{0, tree.n_action}));
    CHECK(!consistent(tree, LabelPair{(tree.parent[0] + 1) % tree.n_body, 0}));
}

TEST_CASE("json round trip") {
    ActionTree tree = make_even_tree(3, 8);
    tree.body_names = {"head", "hand", "leg"};
    const ActionTree back = tree_from_json_text(tree_to_json_text(tree));
    CHECK(back.n_body == tree.n_body);
    CHECK(back.n_action == tree.n_action);
    CHECK(back.parent == tree.parent);
    CHECK(back.body_names == tree.body_names);

    CHECK_THROWS_AS((void)tree_from_json_text("not json"), parse_error);
    CHECK_THROWS_AS((void)tree_from_json_text(R"({"n_body": 1})"), parse_error);
    // structurally invalid tree content must be rejected on load
    CHECK_THROWS_AS(
        (void)tree_from_json_text(R"({"n_body":2,"n_action":2,"parent":[0,0],"body_names":[],"action_names":[]})"),
        parse_error);
}

} // TEST_SUITE
