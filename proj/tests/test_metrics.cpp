#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "ccl/ccl.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace ccl;

TEST_CASE("roc_auc on hand-checked cases") {
    CHECK(roc_auc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) == Catch::Approx(0.75));
    CHECK(roc_auc({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}) == 1.0);
    CHECK(roc_auc({0.9, 0.8, 0.2, 0.1}, {0, 0, 1, 1}) == 0.0);
    CHECK(roc_auc({0.5, 0.5, 0.5, 0.5}, {0, 1, 0, 1}) == Catch::Approx(0.5));
    CHECK(roc_auc(std::vector<double>{0.5, 0.5}, std::vector<int>{0, 1}) ==
          Catch::Approx(0.5));   // tie = half credit
}

TEST_CASE("roc_auc input validation") {
    using dv = std::vector<double>;
    using iv = std::vector<int>;
    CHECK_THROWS_AS(roc_auc(dv{}, iv{}), ValidationError);
    CHECK_THROWS_AS(roc_auc(dv{0.5}, iv{0, 1}), ValidationError);
    CHECK_THROWS_AS(roc_auc(dv{0.5, 0.5}, iv{0, 0}), ValidationError);
    CHECK_THROWS_AS(roc_auc(dv{0.5, std::nan("")}, iv{0, 1}), ValidationError);
    CHECK_THROWS_AS(roc_auc(dv{0.5, 0.6}, iv{0, 2}), ValidationError);
}

TEST_CASE("roc_auc matches the pair-counting oracle on random cases") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> us(0.0, 1.0);
    for (int rep = 0; rep < 60; ++rep) {
        const int n = 2 + static_cast<int>(rng() % 49);
        std::vector<double> s(n);
        std::vector<int> y(n);
        bool pos = false, neg = false;
        for (int i = 0; i < n; ++i) {
            // Coarse grid ensures plenty of ties.
            s[i] = std::floor(us(rng) * 8.0) / 8.0;
            y[i] = rng() % 2;
            (y[i] ? pos : neg) = true;
        }
        if (!pos) y[0] = 1;
        if (!neg) y[static_cast<std::size_t>(n - 1)] = 0;
        const double lib = roc_auc(s, y);
        const double ref = oracle::auc_pairs(s, y);
        CHECK(std::abs(lib - ref) < 1e-12);
    }
}

TEST_CASE("roc_auc map overload joins scores with gold labels") {
    ConfidenceScore scores{{"a", 0.1}, {"b", 0.4}, {"c", 0.35}, {"d", 0.8}};
    std::map<std::string, GoldLabel> gold;
    gold["a"].label = 0;
    gold["b"].label = 0;
    gold["c"].label = 1;
    gold["d"].label = 1;
    CHECK(roc_auc(scores, gold) == Catch::Approx(0.75));
    scores["e"] = 0.2;
    CHECK_THROWS_AS(roc_auc(scores, gold), ValidationError);
}

TEST_CASE("stratified_auc computes per-level AUCs and skips one-class strata") {
    ConfidenceScore scores;
    std::map<std::string, GoldLabel> gold;
    DifficultyAssignment asg;
    asg.granularity = Granularity::fine;
    // easy stratum: separable; hard stratum: anti-separated; very_hard: one class
    auto put = [&](const std::string& id, double s, int y, DifficultyLevel lvl) {
        scores[id] = s;
        gold[id].label = y;
        asg.bins[id] = lvl;
    };
    put("e1", 0.9, 1, DifficultyLevel::easy);
    put("e2", 0.8, 1, DifficultyLevel::easy);
    put("e3", 0.1, 0, DifficultyLevel::easy);
    put("h1", 0.2, 1, DifficultyLevel::hard);
    put("h2", 0.9, 0, DifficultyLevel::hard);
    put("v1", 0.6, 1, DifficultyLevel::very_hard);

    const auto out = stratified_auc(scores, gold, asg);
    CHECK(out.per_level.at(DifficultyLevel::easy) == 1.0);
    CHECK(out.per_level.at(DifficultyLevel::hard) == 0.0);
    CHECK(out.per_level.count(DifficultyLevel::very_hard) == 0);
    REQUIRE(out.skipped.size() == 1);
    CHECK(out.skipped[0] == DifficultyLevel::very_hard);
    CHECK(out.overall == Catch::Approx(roc_auc({0.9, 0.8, 0.1, 0.2, 0.9, 0.6},
                                               {1, 1, 0, 1, 0, 1})));

    asg.bins.erase("v1");
    CHECK_THROWS_AS(stratified_auc(scores, gold, asg), ValidationError);
}

TEST_CASE("pairwise agreement percentages on a hand-built dataset") {
    Dataset ds;
    ds.num_annotators = 3;
    ds.feature_dim = 1;
    // annotators: a0 and a1 agree on 3/4, a0/a2 on 2/4, a1/a2 on 1/4
    const std::vector<std::vector<int>> rows = {
        {1, 1, 1}, {1, 1, 0}, {0, 0, 1}, {1, 0, 1}};
    for (std::size_t i = 0; i < rows.size(); ++i)
        ds.examples.push_back(
            helpers::make_example("e" + std::to_string(i), "g", {0.0}, rows[i]));

    const auto m = pairwise_agreement(ds, TiePolicy::class0);
    CHECK(m.pairwise[0][1] == Catch::Approx(75.0));
    CHECK(m.pairwise[0][2] == Catch::Approx(50.0));
    CHECK(m.pairwise[1][2] == Catch::Approx(25.0));
    CHECK(m.pairwise[1][0] == m.pairwise[0][1]);
    CHECK(std::isnan(m.pairwise[0][0]));
    CHECK(m.pairwise_mean == Catch::Approx(50.0));

    // majorities: 1, 1, 0, 1
    CHECK(m.majority_agreement[0] == Catch::Approx(100.0));
    CHECK(m.majority_agreement[1] == Catch::Approx(75.0));
    CHECK(m.majority_agreement[2] == Catch::Approx(50.0));
    CHECK(m.majority_mean == Catch::Approx(75.0));
}

TEST_CASE("cohens_kappa frozen values and degenerate conventions") {
    CHECK(cohens_kappa({1, 0}, {0, 1}) == Catch::Approx(-1.0));
    CHECK(cohens_kappa({1, 0, 1, 0}, {1, 0, 1, 0}) == Catch::Approx(1.0));
    CHECK(cohens_kappa({1, 1, 1}, {1, 1, 1}) == 1.0);        // p_e = 1 convention
    CHECK(cohens_kappa({0, 0, 0}, {1, 1, 1}) == Catch::Approx(0.0));
    CHECK_THROWS_AS(cohens_kappa({1}, {1, 0}), ValidationError);
    CHECK_THROWS_AS(cohens_kappa({}, {}), ValidationError);
}

TEST_CASE("cohens_kappa matches the closed-form oracle") {
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 100; ++rep) {
        const int n = 2 + static_cast<int>(rng() % 99);
        std::vector<int> a(n), b(n);
        for (int i = 0; i < n; ++i) {
            a[i] = rng() % 2;
            b[i] = rng() % 2;
        }
        a[0] = 0;
        a[n - 1] = 1;   // keep marginals non-degenerate
        b[0] = 0;
        b[n - 1] = 1;
        CHECK(std::abs(cohens_kappa(a, b) - oracle::kappa_binary(a, b)) < 1e-14);
    }
}

TEST_CASE("kappa_sweep thresholds the scores strictly") {
    ConfidenceScore scores{{"a", 0.9}, {"b", 0.7}, {"c", 0.3}, {"d", 0.1}};
    std::map<std::string, GoldLabel> gold;
    gold["a"].label = 1;
    gold["b"].label = 1;
    gold["c"].label = 0;
    gold["d"].label = 0;
    const auto sweep = kappa_sweep(scores, gold, {0.5, 0.7, 0.95});
    REQUIRE(sweep.kappas.size() == 3);
    CHECK(sweep.kappas[0] == Catch::Approx(1.0));    // 0.9,0.7 > 0.5
    CHECK(sweep.kappas[1] == Catch::Approx(0.5));    // b lands on the threshold, goes 0
    CHECK(sweep.max_kappa == Catch::Approx(1.0));
    CHECK(sweep.argmax_threshold == 0.5);
}

TEST_CASE("kappa sweep against annotators averages per-annotator kappas") {
    Dataset ds;
    ds.num_annotators = 3;
    ds.feature_dim = 1;
    const std::vector<std::vector<int>> rows = {
        {1, 1, 0}, {1, 0, 0}, {0, 0, 1}, {0, 1, 0}, {1, 1, 1}, {0, 0, 0}};
    ConfidenceScore scores;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto id = "e" + std::to_string(i);
        ds.examples.push_back(helpers::make_example(id, "g", {0.0}, rows[i]));
        scores[id] = majority_vote(rows[i], TiePolicy::class0).label == 1 ? 1.0 : 0.0;
    }

    const auto sweep = kappa_sweep_vs_annotators(scores, ds, {0.2, 0.5, 0.8});
    REQUIRE(sweep.per_annotator.size() == 3);
    for (std::size_t t = 0; t < 3; ++t) {
        std::vector<int> pred;
        for (const auto& ex : ds.examples)
            pred.push_back(scores[ex.id] > sweep.thresholds[t] ? 1 : 0);
        double mean = 0.0;
        for (std::size_t a = 0; a < 3; ++a) {
            std::vector<int> ann;
            for (const auto& ex : ds.examples) ann.push_back(ex.annotator_labels[a]);
            const double expect = oracle::kappa_binary(pred, ann);
            CHECK(sweep.per_annotator[t][a] == Catch::Approx(expect).margin(1e-14));
            mean += expect;
        }
        CHECK(sweep.mean_per_threshold[t] == Catch::Approx(mean / 3.0).margin(1e-14));
    }
}

TEST_CASE("annotator reference kappas compare each rater to the rest") {
    Dataset ds;
    ds.num_annotators = 3;
    ds.feature_dim = 1;
    const std::vector<std::vector<int>> rows = {
        {1, 1, 0}, {1, 1, 1}, {0, 0, 1}, {0, 0, 0}, {1, 0, 1}, {0, 1, 1}};
    for (std::size_t i = 0; i < rows.size(); ++i)
        ds.examples.push_back(helpers::make_example("e" + std::to_string(i), "g", {0.0}, rows[i]));

    const auto ref = annotator_reference_kappas(ds);
    REQUIRE(ref.size() == 3);
    for (std::size_t a = 0; a < 3; ++a) {
        std::vector<int> own, rest_maj;
        for (const auto& row : rows) {
            std::vector<int> rest;
            for (std::size_t b = 0; b < 3; ++b)
                if (b != a) rest.push_back(row[b]);
            own.push_back(row[a]);
            rest_maj.push_back(majority_vote(rest, TiePolicy::class0).label);
        }
        CHECK(ref[a] == Catch::Approx(oracle::kappa_binary(own, rest_maj)).margin(1e-14));
    }
}

TEST_CASE("top_k_mean and seed summaries") {
    CHECK(top_k_mean({0.80, 0.81, 0.82, 0.83, 0.84, 0.85}, 5) == Catch::Approx(0.83));
    CHECK(top_k_mean({1.0, 2.0}, 5) == Catch::Approx(1.5));
    CHECK_THROWS_AS(top_k_mean({}, 5), ValidationError);

    const auto s = summarize_seeds({1.0, 3.0});
    CHECK(s.mean == Catch::Approx(2.0));
    CHECK(s.std_dev == Catch::Approx(std::sqrt(2.0)));
    CHECK(s.n == 2);
    CHECK(summarize_seeds({4.0}).std_dev == 0.0);
}

TEST_CASE("student t p-values at known points") {
    CHECK(student_t_two_sided_p(0.0, 10.0) == Catch::Approx(1.0));
    // df=1: p = 1 - (2/pi) atan(t)
    CHECK(student_t_two_sided_p(1.0, 1.0) == Catch::Approx(0.5).epsilon(1e-10));
    CHECK(student_t_two_sided_p(-1.0, 1.0) == Catch::Approx(0.5).epsilon(1e-10));
    // textbook two-sample case: t = 1, df = 8
    CHECK(student_t_two_sided_p(1.0, 8.0) == Catch::Approx(0.34659).margin(5e-4));
}

TEST_CASE("welch t-test on a hand-checked case") {
    const std::vector<double> x{1, 2, 3, 4, 5};
    const std::vector<double> y{2, 3, 4, 5, 6};
    const auto r = t_test_two_sample(x, y);
    CHECK(r.t == Catch::Approx(-1.0));
    CHECK(r.df == Catch::Approx(8.0));
    CHECK(r.p == Catch::Approx(0.34659).margin(5e-4));
    CHECK_FALSE(r.underflow);

    const auto same = t_test_two_sample({2, 2, 2}, {2, 2, 2});
    CHECK(same.t == 0.0);
    CHECK(same.p == 1.0);

    const auto sep = t_test_two_sample({1, 1, 1}, {2, 2, 2});
    CHECK(sep.p == Catch::Approx(1e-300));
    CHECK(sep.underflow);

    CHECK_THROWS_AS(t_test_two_sample({1.0}, {1.0, 2.0}), ValidationError);
}

TEST_CASE("significance stars follow the reporting convention") {
    CHECK(significance_stars(0.0005) == "***");
    CHECK(significance_stars(0.001) == "***");
    CHECK(significance_stars(0.01) == "*");
    CHECK(significance_stars(0.05) == "*");
    CHECK(significance_stars(0.06) == "");
}
