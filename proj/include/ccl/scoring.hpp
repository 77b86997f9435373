#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "ccl/dataset.hpp"
#include "ccl/difficulty.hpp"
#include "ccl/errors.hpp"
#include "ccl/learner.hpp"
#include "ccl/rng.hpp"

namespace ccl {

/// Probability the model assigns to each example's gold class.
inline ConfidenceScore score_gold_confidence(const Model& m, const Dataset& ds,
                                             const std::map<std::string, GoldLabel>& gold) {
    ConfidenceScore out;
    for (const auto& ex : ds.examples) {
        auto it = gold.find(ex.id);
        if (it == gold.end()) throw ValidationError("no gold label for id " + ex.id);
        const auto p = forward(m, ex.features);
        out[ex.id] = it->second.label == 1 ? p.second : p.first;
    }
    return out;
}

namespace detail {

/// One training phase over the whole dataset (pool in id order, like a
/// schedule stage): fresh optimizer state, shared rng stream, and a global
/// epoch counter driving the lr decay. Mirrors train_schedule's inner loop
/// so a phase is bit-identical to a stage over the same ids.
inline void train_phase(Model& model, const Dataset& ds,
                        const std::map<std::string, GoldLabel>& gold, const LearnerConfig& cfg,
                        int epochs, int& global_epoch, RandomSource& rng) {
    std::vector<const AnnotatedExample*> pool;
    pool.reserve(ds.size());
    for (const auto& ex : ds.examples) pool.push_back(&ex);
    std::sort(pool.begin(), pool.end(),
              [](const AnnotatedExample* a, const AnnotatedExample* b) { return a->id < b->id; });
    std::vector<int> pool_labels;
    pool_labels.reserve(pool.size());
    for (const auto* ex : pool) {
        auto it = gold.find(ex->id);
        if (it == gold.end()) throw ValidationError("no gold label for id " + ex->id);
        pool_labels.push_back(it->second.label);
    }

    AdamState adam = init_adam(model);
    std::vector<std::size_t> order(pool.size());
    for (int ep = 0; ep < epochs; ++ep) {
        const double lr = lr_at_epoch(cfg, global_epoch);
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(order);

        const std::size_t b = static_cast<std::size_t>(cfg.batch_size);
        for (std::size_t start = 0; start < order.size(); start += b) {
            const std::size_t stop = std::min(start + b, order.size());
            std::vector<std::vector<double>> feats;
            std::vector<int> labels;
            feats.reserve(stop - start);
            labels.reserve(stop - start);
            for (std::size_t k = start; k < stop; ++k) {
                std::vector<double> f = pool[order[k]]->features;
                if (cfg.augment_sigma > 0.0)
                    for (auto& v : f) v += rng.normal(0.0, cfg.augment_sigma);
                feats.push_back(std::move(f));
                labels.push_back(pool_labels[order[k]]);
            }
            auto grads = zero_gradients(model);
            try {
                batch_loss_and_gradients(model, feats, labels, grads);
                adam_step(model, grads, adam, cfg, lr);
            } catch (const NumericError& e) {
                throw NumericError(std::string(e.what()) + " (epoch " +
                                   std::to_string(global_epoch) + ")");
            }
        }
        ++global_epoch;
    }
}

}  // namespace detail

/// Trains a fresh model on the training set's own gold labels, then scores
/// every training example with the trained model's confidence in its gold
/// class. Deterministic per seed.
inline ConfidenceScore score_self_taught(const Dataset& train, const LearnerConfig& config,
                                         std::uint64_t seed,
                                         TiePolicy tie_policy = TiePolicy::error) {
    if (train.examples.empty()) throw ValidationError("score_self_taught: empty dataset");
    const auto gold = gold_labels(train, tie_policy);

    LearnerConfig cfg = config;
    cfg.seed = seed;
    validate_config(cfg);
    Model model = init_model(cfg, train.feature_dim);
    RandomSource rng(derive_seed(seed, "train"));
    int epoch = 0;
    detail::train_phase(model, train, gold, cfg, cfg.epochs, epoch, rng);
    return score_gold_confidence(model, train, gold);
}

/// Like score_self_taught, but the model first trains on a surrogate
/// pretraining set (its own gold labels), then fine-tunes on the target
/// set with the lr decay continuing from the pretraining epochs.
inline ConfidenceScore score_transfer(const Dataset& train, const Dataset& pretrain,
                                      const LearnerConfig& config, std::uint64_t seed,
                                      TiePolicy tie_policy = TiePolicy::error) {
    if (train.examples.empty() || pretrain.examples.empty())
        throw ValidationError("score_transfer: empty dataset");
    if (pretrain.feature_dim != train.feature_dim)
        throw SchemaError("score_transfer: pretrain feature_dim " +
                          std::to_string(pretrain.feature_dim) + " != train feature_dim " +
                          std::to_string(train.feature_dim));
    const auto gold_pre = gold_labels(pretrain, tie_policy);
    const auto gold = gold_labels(train, tie_policy);

    LearnerConfig cfg = config;
    cfg.seed = seed;
    validate_config(cfg);
    Model model = init_model(cfg, train.feature_dim);
    RandomSource rng(derive_seed(seed, "train"));
    int epoch = 0;
    detail::train_phase(model, pretrain, gold_pre, cfg, cfg.epochs, epoch, rng);
    detail::train_phase(model, train, gold, cfg, cfg.epochs, epoch, rng);
    return score_gold_confidence(model, train, gold);
}

}  // namespace ccl
