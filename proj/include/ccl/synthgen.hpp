#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "ccl/dataset.hpp"
#include "ccl/difficulty.hpp"
#include "ccl/errors.hpp"
#include "ccl/rng.hpp"

namespace ccl {

/// Synthetic data model: latent truth y with a class prior, latent
/// difficulty d ~ Beta, features collapsing toward the class boundary as d
/// grows, and K annotators who flip y independently with probability
/// p(d) = p_min + (p_max - p_min) * d.
struct GenConfig {
    std::size_t num_examples = 5000;
    std::size_t num_groups = 100;
    std::size_t feature_dim = 8;
    std::size_t num_annotators = 7;
    double class_prior = 0.686;          // fraction of latent class 1
    double difficulty_alpha = 1.2;       // Beta shape, skewed toward easy
    double difficulty_beta = 2.4;
    double class_mean_separation = 2.0;  // distance scale between class means
    double feature_noise_std = 1.0;
    double annotator_p_min = 0.02;
    double annotator_p_max = 0.35;
    std::vector<double> per_annotator_bias;   // optional additive flip-rate offsets
    double direct_score_noise = 0.15;    // jitter on d before quartile ranking
    std::uint64_t seed = 1;
};

inline void validate_gen_config(const GenConfig& cfg) {
    if (cfg.num_examples < 1) throw ValidationError("num_examples must be >= 1");
    if (cfg.num_groups < 1 || cfg.num_groups > cfg.num_examples)
        throw ValidationError("num_groups must be in [1, num_examples]");
    if (cfg.feature_dim < 1) throw ValidationError("feature_dim must be >= 1");
    if (cfg.num_annotators < 1) throw ValidationError("num_annotators must be >= 1");
    if (!(cfg.class_prior > 0.0 && cfg.class_prior < 1.0))
        throw ValidationError("class_prior must be in (0,1)");
    if (!(cfg.difficulty_alpha > 0.0) || !(cfg.difficulty_beta > 0.0))
        throw ValidationError("difficulty Beta shapes must be positive");
    if (cfg.class_mean_separation < 0.0)
        throw ValidationError("class_mean_separation must be >= 0");
    if (cfg.feature_noise_std < 0.0) throw ValidationError("feature_noise_std must be >= 0");
    if (!(cfg.annotator_p_min >= 0.0 && cfg.annotator_p_min <= cfg.annotator_p_max &&
          cfg.annotator_p_max < 0.5))
        throw ValidationError("need 0 <= p_min <= p_max < 0.5");
    if (!cfg.per_annotator_bias.empty() &&
        cfg.per_annotator_bias.size() != cfg.num_annotators)
        throw ValidationError("per_annotator_bias must have one entry per annotator");
    if (cfg.direct_score_noise < 0.0) throw ValidationError("direct_score_noise must be >= 0");
}

inline Dataset generate(const GenConfig& cfg) {
    validate_gen_config(cfg);
    RandomSource rng(derive_seed(cfg.seed, "generate"));

    // Random unit direction separating the class means.
    std::vector<double> u(cfg.feature_dim);
    double norm = 0.0;
    do {
        norm = 0.0;
        for (auto& v : u) {
            v = rng.normal();
            norm += v * v;
        }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (auto& v : u) v /= norm;

    int id_width = 1;
    for (std::size_t n = cfg.num_examples - 1; n >= 10; n /= 10) ++id_width;

    Dataset ds;
    ds.num_annotators = cfg.num_annotators;
    ds.feature_dim = cfg.feature_dim;
    ds.examples.reserve(cfg.num_examples);

    for (std::size_t i = 0; i < cfg.num_examples; ++i) {
        AnnotatedExample ex;
        std::string num = std::to_string(i);
        ex.id = "ex" + std::string(static_cast<std::size_t>(id_width) - num.size(), '0') + num;
        ex.group_id = "g" + std::to_string(rng.uniform_index(cfg.num_groups));

        const int y = rng.bernoulli(cfg.class_prior) ? 1 : 0;
        const double d = rng.beta(cfg.difficulty_alpha, cfg.difficulty_beta);
        const double sign = y == 1 ? 1.0 : -1.0;
        ex.features.resize(cfg.feature_dim);
        for (std::size_t f = 0; f < cfg.feature_dim; ++f)
            ex.features[f] = sign * cfg.class_mean_separation * u[f] * (1.0 - d) +
                             rng.normal(0.0, cfg.feature_noise_std);

        const double p = cfg.annotator_p_min + (cfg.annotator_p_max - cfg.annotator_p_min) * d;
        ex.annotator_labels.resize(cfg.num_annotators);
        for (std::size_t a = 0; a < cfg.num_annotators; ++a) {
            double pa = p;
            if (!cfg.per_annotator_bias.empty())
                pa = std::clamp(p + cfg.per_annotator_bias[a], 0.0, 0.499);
            ex.annotator_labels[a] = rng.bernoulli(pa) ? 1 - y : y;
        }

        ex.latent_difficulty = d;
        ex.latent_truth = y;
        ds.examples.push_back(std::move(ex));
    }

    // Direct 1-4 difficulty scores: rank noisy d and cut into quartiles.
    std::vector<double> noisy(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i)
        noisy[i] = *ds.examples[i].latent_difficulty + rng.normal(0.0, cfg.direct_score_noise);
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return noisy[a] < noisy[b]; });
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        const auto q = static_cast<int>(pos * 4 / order.size()) + 1;
        ds.examples[order[pos]].direct_difficulty = std::min(q, 4);
    }

    validate_dataset(ds);
    return ds;
}

/// Fraction of examples whose agreement falls in the coarse easy bin.
inline double easy_fraction(const Dataset& ds) {
    const auto asg = bin_by_agreement(ds, Granularity::coarse);
    std::size_t easy = 0;
    for (const auto& [id, level] : asg.bins) easy += level == DifficultyLevel::easy;
    return static_cast<double>(easy) / static_cast<double>(asg.bins.size());
}

struct CalibrationResult {
    GenConfig config;
    double achieved_easy_fraction = 0.0;
};

/// Bisects annotator_p_max until the simulated coarse easy fraction lands
/// within `tolerance` of the target. All other fields of `fixed` stay as
/// given; the simulation seed is held constant across candidate evaluations
/// so the search sees a deterministic monotone curve.
inline CalibrationResult calibrate(double target_easy_fraction, const GenConfig& fixed,
                                   double tolerance = 0.02, std::size_t sim_examples = 20000) {
    if (!(target_easy_fraction > 0.0 && target_easy_fraction < 1.0))
        throw ValidationError("calibrate: target must be in (0,1)");

    GenConfig sim = fixed;
    sim.num_examples = sim_examples;
    sim.num_groups = std::min(fixed.num_groups, sim_examples);
    sim.seed = derive_seed(fixed.seed, "calibrate");

    auto eval = [&](double p_max) {
        GenConfig c = sim;
        c.annotator_p_max = p_max;
        c.annotator_p_min = std::min(sim.annotator_p_min, p_max);
        return easy_fraction(generate(c));
    };

    double lo = fixed.annotator_p_min;   // easiest: least annotator noise
    double hi = 0.4999;
    double f_lo = eval(lo);
    double f_hi = eval(hi);

    auto finish = [&](double p_max, double achieved) {
        CalibrationResult res;
        res.config = fixed;
        res.config.annotator_p_max = p_max;
        res.config.annotator_p_min = std::min(fixed.annotator_p_min, p_max);
        res.achieved_easy_fraction = achieved;
        return res;
    };

    if (std::abs(f_lo - target_easy_fraction) <= tolerance) return finish(lo, f_lo);
    if (std::abs(f_hi - target_easy_fraction) <= tolerance) return finish(hi, f_hi);
    if (target_easy_fraction > f_lo)
        throw CalibrationError("calibration target " + std::to_string(target_easy_fraction) +
                               " unattainable; closest achieved " + std::to_string(f_lo));
    if (target_easy_fraction < f_hi)
        throw CalibrationError("calibration target " + std::to_string(target_easy_fraction) +
                               " unattainable; closest achieved " + std::to_string(f_hi));

    double best_f = f_lo;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double f_mid = eval(mid);
        if (std::abs(f_mid - target_easy_fraction) < std::abs(best_f - target_easy_fraction))
            best_f = f_mid;
        if (std::abs(f_mid - target_easy_fraction) <= tolerance) return finish(mid, f_mid);
        // Easy fraction decreases as annotator noise grows.
        if (f_mid > target_easy_fraction)
            lo = mid;
        else
            hi = mid;
    }
    throw CalibrationError("calibration did not converge; closest achieved " +
                           std::to_string(best_f));
}

}  // namespace ccl
