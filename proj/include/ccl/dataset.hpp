#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ccl/errors.hpp"
#include "ccl/rng.hpp"

namespace ccl {

/// One labeled example: a feature vector plus the full multi-annotator
/// label vector. Labels are binary (0/1). latent_* fields are diagnostics
/// populated only by the synthetic generator; training and evaluation
/// never read them.
struct AnnotatedExample {
    std::string id;
    std::string group_id;
    std::vector<double> features;
    std::vector<int> annotator_labels;
    std::optional<int> direct_difficulty;       // 1 (very easy) .. 4 (very hard)
    std::optional<double> latent_difficulty;    // diagnostic, in [0,1]
    std::optional<int> latent_truth;            // diagnostic class label
};

struct Dataset {
    std::vector<AnnotatedExample> examples;
    std::size_t num_annotators = 0;
    std::size_t feature_dim = 0;
    std::vector<std::string> class_names = {"class0", "class1"};

    std::size_t size() const { return examples.size(); }
};

/// Majority-vote result for one example.
struct GoldLabel {
    int label = 0;
    int agreement_count = 0;      // votes for the majority class
    double agreement_fraction = 0.0;
};

enum class TiePolicy { error, class0 };

/// Throws if the dataset violates its invariants (unique ids, uniform K and
/// F, finite features, valid labels, direct scores in 1..4).
inline void validate_dataset(const Dataset& ds) {
    std::unordered_set<std::string> seen;
    seen.reserve(ds.size());
    for (std::size_t i = 0; i < ds.examples.size(); ++i) {
        const auto& ex = ds.examples[i];
        if (!seen.insert(ex.id).second)
            throw ValidationError("duplicate example id '" + ex.id + "'");
        if (ex.annotator_labels.size() != ds.num_annotators)
            throw SchemaError("example '" + ex.id + "' has " +
                              std::to_string(ex.annotator_labels.size()) + " labels, expected " +
                              std::to_string(ds.num_annotators));
        if (ex.features.size() != ds.feature_dim)
            throw SchemaError("example '" + ex.id + "' has " +
                              std::to_string(ex.features.size()) + " features, expected " +
                              std::to_string(ds.feature_dim));
        for (double f : ex.features)
            if (!std::isfinite(f))
                throw ValidationError("non-finite feature in example '" + ex.id + "'");
        for (int a : ex.annotator_labels)
            if (a != 0 && a != 1)
                throw ValidationError("label out of range in example '" + ex.id + "'");
        if (ex.direct_difficulty && (*ex.direct_difficulty < 1 || *ex.direct_difficulty > 4))
            throw ValidationError("direct difficulty out of range 1..4 in example '" + ex.id + "'");
    }
}

/// Strict majority vote over one example's annotator labels.
inline GoldLabel majority_vote(const std::vector<int>& labels, TiePolicy tie_policy = TiePolicy::error) {
    if (labels.empty()) throw ValidationError("majority_vote: empty label vector");
    int ones = 0;
    for (int a : labels) {
        if (a != 0 && a != 1) throw ValidationError("majority_vote: label out of range");
        ones += a;
    }
    const int k = static_cast<int>(labels.size());
    const int zeros = k - ones;
    GoldLabel g;
    if (ones == zeros) {
        if (tie_policy == TiePolicy::error)
            throw TieError("majority_vote: exact tie with " + std::to_string(k) + " annotators");
        g.label = 0;
        g.agreement_count = zeros;
    } else if (ones > zeros) {
        g.label = 1;
        g.agreement_count = ones;
    } else {
        g.label = 0;
        g.agreement_count = zeros;
    }
    g.agreement_fraction = static_cast<double>(g.agreement_count) / k;
    return g;
}

/// Majority-vote gold labels for every example, keyed by id.
inline std::map<std::string, GoldLabel> gold_labels(const Dataset& ds,
                                                    TiePolicy tie_policy = TiePolicy::error) {
    std::map<std::string, GoldLabel> out;
    for (const auto& ex : ds.examples) out[ex.id] = majority_vote(ex.annotator_labels, tie_policy);
    return out;
}

/// Distribution of agreement levels: agreement_count -> number of examples.
inline std::map<int, std::size_t> agreement_histogram(const Dataset& ds,
                                                      TiePolicy tie_policy = TiePolicy::error) {
    std::map<int, std::size_t> hist;
    for (const auto& ex : ds.examples) ++hist[majority_vote(ex.annotator_labels, tie_policy).agreement_count];
    return hist;
}

/// Group-respecting train/test split: every group_id lands entirely on one
/// side. Groups are considered in seeded random order and assigned to the
/// test side whenever that moves the realized test count closer to
/// test_fraction * N. Deterministic for a given seed.
inline std::pair<Dataset, Dataset> split_by_group(const Dataset& ds, double test_fraction,
                                                  std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ValidationError("split_by_group: test_fraction must be in (0,1)");

    std::vector<std::string> group_order;
    std::unordered_map<std::string, std::size_t> group_size;
    for (const auto& ex : ds.examples) {
        auto [it, inserted] = group_size.try_emplace(ex.group_id, 0);
        if (inserted) group_order.push_back(ex.group_id);
        ++it->second;
    }
    if (group_order.size() < 2)
        throw ValidationError("split_by_group: need at least 2 distinct groups, have " +
                              std::to_string(group_order.size()));

    RandomSource rng(derive_seed(seed, "split_by_group"));
    rng.shuffle(group_order);

    const double target = test_fraction * static_cast<double>(ds.size());
    std::unordered_set<std::string> test_groups;
    double test_count = 0;
    for (const auto& g : group_order) {
        const double sz = static_cast<double>(group_size[g]);
        if (std::abs(test_count + sz - target) < std::abs(test_count - target)) {
            test_groups.insert(g);
            test_count += sz;
        }
    }
    // Degenerate fractions can leave a side empty; move the single best group.
    if (test_groups.empty()) {
        const std::string* best = nullptr;
        for (const auto& g : group_order)
            if (!best || group_size[g] < group_size[*best]) best = &g;
        test_groups.insert(*best);
    } else if (test_groups.size() == group_order.size()) {
        const std::string* best = nullptr;
        for (const auto& g : group_order)
            if (!best || group_size[g] < group_size[*best]) best = &g;
        test_groups.erase(*best);
    }

    Dataset train, test;
    train.num_annotators = test.num_annotators = ds.num_annotators;
    train.feature_dim = test.feature_dim = ds.feature_dim;
    train.class_names = test.class_names = ds.class_names;
    for (const auto& ex : ds.examples) {
        if (test_groups.count(ex.group_id))
            test.examples.push_back(ex);
        else
            train.examples.push_back(ex);
    }
    return {std::move(train), std::move(test)};
}

}  // namespace ccl
