#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>

#include "ccl/ccl.hpp"
#include "helpers.hpp"

using namespace ccl;
using Catch::Approx;

TEST_CASE("generator config validation") {
    GenConfig ok;
    CHECK_NOTHROW(validate_gen_config(ok));

    auto reject = [](auto&& tweak) {
        GenConfig c;
        tweak(c);
        CHECK_THROWS_AS(validate_gen_config(c), ValidationError);
    };
    reject([](GenConfig& c) { c.num_examples = 0; });
    reject([](GenConfig& c) { c.num_groups = 0; });
    reject([](GenConfig& c) { c.num_examples = 10, c.num_groups = 11; });
    reject([](GenConfig& c) { c.feature_dim = 0; });
    reject([](GenConfig& c) { c.num_annotators = 0; });
    reject([](GenConfig& c) { c.class_prior = 0.0; });
    reject([](GenConfig& c) { c.class_prior = 1.0; });
    reject([](GenConfig& c) { c.difficulty_alpha = 0.0; });
    reject([](GenConfig& c) { c.class_mean_separation = -1.0; });
    reject([](GenConfig& c) { c.feature_noise_std = -0.5; });
    reject([](GenConfig& c) { c.annotator_p_min = 0.4, c.annotator_p_max = 0.3; });
    reject([](GenConfig& c) { c.annotator_p_max = 0.5; });
    reject([](GenConfig& c) { c.per_annotator_bias = {0.01, 0.02}; });
    reject([](GenConfig& c) { c.direct_score_noise = -0.1; });
}

TEST_CASE("generated datasets have the advertised shape") {
    GenConfig cfg;
    cfg.num_examples = 400;
    cfg.num_groups = 20;
    cfg.feature_dim = 4;
    cfg.seed = 3;
    const auto ds = generate(cfg);

    REQUIRE(ds.size() == 400);
    CHECK(ds.feature_dim == 4);
    CHECK(ds.num_annotators == 7);
    CHECK_NOTHROW(validate_dataset(ds));

    std::set<std::string> ids, groups;
    std::map<int, int> direct_counts;
    int ones = 0;
    for (const auto& ex : ds.examples) {
        ids.insert(ex.id);
        groups.insert(ex.group_id);
        CHECK(ex.id.size() == 5);    // "ex" + zero-padded 3-digit index
        CHECK(ex.features.size() == 4);
        CHECK(ex.annotator_labels.size() == 7);

        REQUIRE(ex.latent_truth.has_value());
        REQUIRE(ex.latent_difficulty.has_value());
        CHECK((*ex.latent_truth == 0 || *ex.latent_truth == 1));
        CHECK(*ex.latent_difficulty >= 0.0);
        CHECK(*ex.latent_difficulty < 1.0);
        ones += *ex.latent_truth;

        REQUIRE(ex.direct_difficulty.has_value());
        ++direct_counts[*ex.direct_difficulty];
    }
    CHECK(ids.size() == 400);
    CHECK(groups.size() > 1);
    CHECK(groups.size() <= 20);

    // noisy-rank quartiles split 400 examples into four bins of 100
    CHECK(direct_counts[1] == 100);
    CHECK(direct_counts[2] == 100);
    CHECK(direct_counts[3] == 100);
    CHECK(direct_counts[4] == 100);

    CHECK(static_cast<double>(ones) / 400.0 == Approx(cfg.class_prior).margin(0.08));
}

TEST_CASE("generation is deterministic in the seed") {
    GenConfig cfg;
    cfg.num_examples = 120;
    cfg.num_groups = 10;
    cfg.seed = 21;

    const auto a = generate(cfg);
    const auto b = generate(cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.examples[i].id == b.examples[i].id);
        CHECK(a.examples[i].features == b.examples[i].features);
        CHECK(a.examples[i].annotator_labels == b.examples[i].annotator_labels);
        CHECK(a.examples[i].direct_difficulty == b.examples[i].direct_difficulty);
    }

    GenConfig other = cfg;
    other.seed = 22;
    const auto c = generate(other);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.size() && !any_diff; ++i)
        any_diff = a.examples[i].annotator_labels != c.examples[i].annotator_labels ||
                   a.examples[i].features != c.examples[i].features;
    CHECK(any_diff);
}

TEST_CASE("harder latent examples draw more annotator disagreement") {
    GenConfig cfg;
    cfg.num_examples = 3000;
    cfg.seed = 9;
    const auto ds = generate(cfg);

    std::vector<double> diffs;
    for (const auto& ex : ds.examples) diffs.push_back(*ex.latent_difficulty);
    std::nth_element(diffs.begin(), diffs.begin() + static_cast<std::ptrdiff_t>(diffs.size() / 2),
                     diffs.end());
    const double median = diffs[diffs.size() / 2];

    double low_sum = 0.0, high_sum = 0.0;
    int low_n = 0, high_n = 0;
    for (const auto& ex : ds.examples) {
        const auto mv = majority_vote(ex.annotator_labels);
        if (*ex.latent_difficulty <= median) {
            low_sum += mv.agreement_fraction;
            ++low_n;
        } else {
            high_sum += mv.agreement_fraction;
            ++high_n;
        }
    }
    CHECK(low_sum / low_n > high_sum / high_n + 0.02);
}

TEST_CASE("direct scores track latent difficulty quartile by quartile") {
    GenConfig cfg;
    cfg.num_examples = 2000;
    cfg.seed = 14;
    const auto ds = generate(cfg);

    std::map<int, std::pair<double, int>> acc;
    for (const auto& ex : ds.examples) {
        auto& [sum, n] = acc[*ex.direct_difficulty];
        sum += *ex.latent_difficulty;
        ++n;
    }
    REQUIRE(acc.size() == 4);
    double prev = -1.0;
    for (int q = 1; q <= 4; ++q) {
        const double mean = acc[q].first / acc[q].second;
        CHECK(mean > prev);
        prev = mean;
    }
}

TEST_CASE("easy fraction counts the coarse easy bin") {
    const auto ds = helpers::agreement_dataset({{7, 3}, {6, 1}, {5, 2}, {4, 2}});
    CHECK(easy_fraction(ds) == Approx(0.5).margin(1e-15));
}

TEST_CASE("calibration hits a feasible easy-fraction target") {
    GenConfig fixed;
    fixed.num_examples = 2000;
    fixed.num_groups = 40;
    fixed.feature_dim = 4;
    fixed.seed = 11;

    const double target = 0.7;
    const auto res = calibrate(target, fixed, /*tolerance=*/0.03, /*sim_examples=*/4000);

    CHECK(res.config.annotator_p_max > fixed.annotator_p_min);
    CHECK(res.config.annotator_p_max < 0.5);
    CHECK(std::abs(res.achieved_easy_fraction - target) <= 0.03);
    // everything except the searched knob stays put
    CHECK(res.config.seed == fixed.seed);
    CHECK(res.config.num_examples == fixed.num_examples);

    // A fresh draw from the calibrated config lands near the target too.
    const double realized = easy_fraction(generate(res.config));
    CHECK(std::abs(realized - target) <= 0.07);
}

TEST_CASE("calibration rejects unreachable targets") {
    GenConfig fixed;
    fixed.seed = 2;
    // Noise-free annotators still disagree sometimes, so a target this close
    // to 1 sits above the whole reachable range.
    CHECK_THROWS_AS(calibrate(0.9999, fixed, 0.001, 3000), CalibrationError);
    CHECK_THROWS_AS(calibrate(0.05, fixed, 0.01, 3000), CalibrationError);
    CHECK_THROWS_AS(calibrate(0.0, fixed, 0.01, 3000), ValidationError);
    CHECK_THROWS_AS(calibrate(1.0, fixed, 0.01, 3000), ValidationError);
}
