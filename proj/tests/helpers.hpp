#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ccl/ccl.hpp"

namespace helpers {

inline ccl::AnnotatedExample make_example(std::string id, std::string group,
                                          std::vector<double> features, std::vector<int> labels,
                                          std::optional<int> direct = std::nullopt) {
    ccl::AnnotatedExample ex;
    ex.id = std::move(id);
    ex.group_id = std::move(group);
    ex.features = std::move(features);
    ex.annotator_labels = std::move(labels);
    ex.direct_difficulty = direct;
    return ex;
}

// Label vector with `ones` votes for class 1 out of k.
inline std::vector<int> votes(int ones, int k) {
    std::vector<int> v(static_cast<std::size_t>(k), 0);
    for (int i = 0; i < ones; ++i) v[static_cast<std::size_t>(i)] = 1;
    return v;
}

// Dataset with a prescribed number of examples at each majority-agreement
// count (K=7): counts[c] examples whose majority got c votes. Majority
// class alternates so both classes appear.
inline ccl::Dataset agreement_dataset(const std::map<int, int>& counts, int k = 7,
                                      int feature_dim = 3, std::uint64_t seed = 17) {
    ccl::Dataset ds;
    ds.num_annotators = static_cast<std::size_t>(k);
    ds.feature_dim = static_cast<std::size_t>(feature_dim);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    int idx = 0;
    for (const auto& [agree, n] : counts) {
        for (int i = 0; i < n; ++i, ++idx) {
            const bool majority_one = idx % 2 == 0;
            const int ones = majority_one ? agree : k - agree;
            std::vector<double> f(static_cast<std::size_t>(feature_dim));
            for (auto& v : f) v = nd(rng);
            ds.examples.push_back(make_example("e" + std::to_string(idx),
                                               "g" + std::to_string(idx % 10), std::move(f),
                                               votes(ones, k)));
        }
    }
    return ds;
}

// Learnable dataset: class-conditional Gaussian features (centers at
// +/- sep/2 in every dimension), majority label always equal to the latent
// class, agreement count cycling 7,6,5,4 so all fine bins are populated.
inline ccl::Dataset separable_dataset(int n, int feature_dim = 2, double sep = 3.0,
                                      double noise = 0.6, std::uint64_t seed = 5) {
    ccl::Dataset ds;
    ds.num_annotators = 7;
    ds.feature_dim = static_cast<std::size_t>(feature_dim);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, noise);
    const int cycle[4] = {7, 6, 5, 4};
    for (int i = 0; i < n; ++i) {
        const int y = i % 2;
        const double center = (y == 1 ? 0.5 : -0.5) * sep;
        std::vector<double> f(static_cast<std::size_t>(feature_dim));
        for (auto& v : f) v = center + nd(rng);
        const int agree = cycle[(i / 2) % 4];
        const int ones = y == 1 ? agree : 7 - agree;
        ds.examples.push_back(make_example("x" + std::to_string(1000 + i),
                                           "g" + std::to_string(i % 8), std::move(f),
                                           votes(ones, 7)));
    }
    return ds;
}

// Fresh scratch directory under the build tree.
inline std::string scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::path("test_tmp") / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

}  // namespace helpers
