#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "ccl/ccl.hpp"
#include "helpers.hpp"

using namespace ccl;
using helpers::make_example;
using helpers::votes;

TEST_CASE("majority vote counts the winning side") {
    auto g = majority_vote({1, 1, 1, 1, 0, 0, 0});
    CHECK(g.label == 1);
    CHECK(g.agreement_count == 4);
    CHECK(g.agreement_fraction == Catch::Approx(4.0 / 7.0));

    g = majority_vote({0, 0, 0, 0, 0, 0, 1});
    CHECK(g.label == 0);
    CHECK(g.agreement_count == 6);

    g = majority_vote({1, 1, 1, 1, 1, 1, 1});
    CHECK(g.label == 1);
    CHECK(g.agreement_count == 7);
    CHECK(g.agreement_fraction == 1.0);
}

TEST_CASE("majority vote tie handling follows the policy") {
    CHECK_THROWS_AS(majority_vote({0, 1, 0, 1}), TieError);
    const auto g = majority_vote({0, 1, 0, 1}, TiePolicy::class0);
    CHECK(g.label == 0);
    CHECK(g.agreement_count == 2);
}

TEST_CASE("majority vote rejects bad labels") {
    CHECK_THROWS_AS(majority_vote({}), ValidationError);
    CHECK_THROWS_AS(majority_vote({0, 2, 1}), ValidationError);
}

TEST_CASE("agreement histogram tallies majority counts") {
    const auto ds = helpers::agreement_dataset({{4, 2}, {5, 3}, {6, 1}, {7, 5}});
    const auto hist = agreement_histogram(ds);
    CHECK(hist.at(4) == 2);
    CHECK(hist.at(5) == 3);
    CHECK(hist.at(6) == 1);
    CHECK(hist.at(7) == 5);
}

TEST_CASE("validate_dataset rejects structural faults") {
    Dataset ds;
    ds.num_annotators = 3;
    ds.feature_dim = 2;
    ds.examples.push_back(make_example("a", "g0", {0.0, 1.0}, {1, 1, 0}));
    CHECK_NOTHROW(validate_dataset(ds));

    SECTION("duplicate id") {
        ds.examples.push_back(make_example("a", "g1", {0.0, 1.0}, {1, 1, 0}));
        CHECK_THROWS_AS(validate_dataset(ds), ValidationError);
    }
    SECTION("annotator count mismatch") {
        ds.examples.push_back(make_example("b", "g1", {0.0, 1.0}, {1, 1}));
        CHECK_THROWS_AS(validate_dataset(ds), SchemaError);
    }
    SECTION("feature dim mismatch") {
        ds.examples.push_back(make_example("b", "g1", {0.0}, {1, 1, 0}));
        CHECK_THROWS_AS(validate_dataset(ds), SchemaError);
    }
    SECTION("non-finite feature") {
        ds.examples.push_back(
            make_example("b", "g1", {std::nan(""), 1.0}, {1, 1, 0}));
        CHECK_THROWS_AS(validate_dataset(ds), ValidationError);
    }
    SECTION("label out of range") {
        ds.examples.push_back(make_example("b", "g1", {0.0, 1.0}, {1, 2, 0}));
        CHECK_THROWS_AS(validate_dataset(ds), ValidationError);
    }
    SECTION("direct difficulty out of range") {
        ds.examples.push_back(make_example("b", "g1", {0.0, 1.0}, {1, 1, 0}, 5));
        CHECK_THROWS_AS(validate_dataset(ds), ValidationError);
    }
}

TEST_CASE("split_by_group keeps groups intact and is seed-deterministic") {
    Dataset ds;
    ds.num_annotators = 3;
    ds.feature_dim = 1;
    for (int i = 0; i < 200; ++i)
        ds.examples.push_back(make_example("e" + std::to_string(i), "g" + std::to_string(i / 5),
                                           {0.1 * i}, votes(i % 2 == 0 ? 3 : 0, 3)));

    auto [train, test] = split_by_group(ds, 0.3, 42);
    CHECK(train.size() + test.size() == ds.size());
    CHECK(train.size() > 0);
    CHECK(test.size() > 0);

    std::set<std::string> train_groups, test_groups;
    for (const auto& ex : train.examples) train_groups.insert(ex.group_id);
    for (const auto& ex : test.examples) test_groups.insert(ex.group_id);
    for (const auto& g : test_groups) CHECK(train_groups.count(g) == 0);

    // Greedy per-group assignment stays near the target fraction.
    const double frac = static_cast<double>(test.size()) / static_cast<double>(ds.size());
    CHECK(frac == Catch::Approx(0.3).margin(0.05));

    auto [train2, test2] = split_by_group(ds, 0.3, 42);
    REQUIRE(test2.size() == test.size());
    for (std::size_t i = 0; i < test.size(); ++i)
        CHECK(test2.examples[i].id == test.examples[i].id);

    auto [train3, test3] = split_by_group(ds, 0.3, 43);
    bool same = test3.size() == test.size();
    if (same)
        for (std::size_t i = 0; i < test.size(); ++i)
            same = same && test3.examples[i].id == test.examples[i].id;
    CHECK_FALSE(same);
}

TEST_CASE("split_by_group never empties a side") {
    Dataset ds;
    ds.num_annotators = 3;
    ds.feature_dim = 1;
    for (int i = 0; i < 10; ++i)
        ds.examples.push_back(
            make_example("e" + std::to_string(i), "g" + std::to_string(i % 2), {1.0}, {1, 1, 1}));
    auto [train, test] = split_by_group(ds, 0.01, 1);
    CHECK(train.size() > 0);
    CHECK(test.size() > 0);

    CHECK_THROWS_AS(split_by_group(ds, 0.0, 1), ValidationError);
    CHECK_THROWS_AS(split_by_group(ds, 1.0, 1), ValidationError);
}

TEST_CASE("split_by_group needs two groups") {
    Dataset ds;
    ds.num_annotators = 1;
    ds.feature_dim = 1;
    ds.examples.push_back(make_example("a", "only", {1.0}, {1}));
    ds.examples.push_back(make_example("b", "only", {2.0}, {0}));
    CHECK_THROWS_AS(split_by_group(ds, 0.5, 1), ValidationError);
}
