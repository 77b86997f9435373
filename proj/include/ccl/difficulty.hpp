#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "ccl/dataset.hpp"
#include "ccl/errors.hpp"

namespace ccl {

enum class DifficultyLevel { very_easy, easy, hard, very_hard };
enum class Granularity { fine, coarse };
enum class DifficultySource { agreement, direct, self_taught, transfer, random };

inline const char* to_string(DifficultyLevel level) {
    switch (level) {
        case DifficultyLevel::very_easy: return "very_easy";
        case DifficultyLevel::easy: return "easy";
        case DifficultyLevel::hard: return "hard";
        case DifficultyLevel::very_hard: return "very_hard";
    }
    return "?";
}

inline const char* to_string(DifficultySource source) {
    switch (source) {
        case DifficultySource::agreement: return "agreement";
        case DifficultySource::direct: return "direct";
        case DifficultySource::self_taught: return "self_taught";
        case DifficultySource::transfer: return "transfer";
        case DifficultySource::random: return "random";
    }
    return "?";
}

/// 0 for the easiest level, 3 for the hardest.
inline int difficulty_rank(DifficultyLevel level) { return static_cast<int>(level); }

/// Per-example difficulty bins over one training set. Fine assignments use
/// all four levels; coarse ones use only easy/hard.
struct DifficultyAssignment {
    std::map<std::string, DifficultyLevel> bins;
    Granularity granularity = Granularity::fine;
    DifficultySource source = DifficultySource::agreement;

    std::vector<std::string> ids_at(DifficultyLevel level) const {
        std::vector<std::string> out;
        for (const auto& [id, lv] : bins)
            if (lv == level) out.push_back(id);
        return out;
    }
};

/// Predicted probability of each example's gold class, keyed by id.
using ConfidenceScore = std::map<std::string, double>;

/// Bins every example by its annotator-agreement level. Fine granularity
/// needs exactly four achievable strict-majority counts (K=7 in the
/// canonical setup): highest count -> very_easy, lowest -> very_hard.
/// Coarse splits the achievable range in half into easy/hard.
inline DifficultyAssignment bin_by_agreement(const Dataset& ds, Granularity granularity) {
    const int k = static_cast<int>(ds.num_annotators);
    const int min_majority = k / 2 + 1;
    const int num_levels = k - min_majority + 1;

    DifficultyAssignment out;
    out.granularity = granularity;
    out.source = DifficultySource::agreement;

    if (granularity == Granularity::fine && num_levels != 4)
        throw ValidationError("fine binning needs exactly 4 achievable agreement levels; K=" +
                              std::to_string(k) + " yields " + std::to_string(num_levels));

    const double coarse_mid = (min_majority + k) / 2.0;
    for (const auto& ex : ds.examples) {
        const int count = majority_vote(ex.annotator_labels).agreement_count;
        if (granularity == Granularity::fine) {
            // k -> very_easy, k-1 -> easy, k-2 -> hard, k-3 -> very_hard
            out.bins[ex.id] = static_cast<DifficultyLevel>(k - count);
        } else {
            out.bins[ex.id] =
                count > coarse_mid ? DifficultyLevel::easy : DifficultyLevel::hard;
        }
    }
    return out;
}

/// Bins every example by its direct 1-4 difficulty score. All examples must
/// carry a valid score; offenders are listed in the error.
inline DifficultyAssignment bin_by_direct_annotation(const Dataset& ds) {
    std::vector<std::string> missing;
    for (const auto& ex : ds.examples)
        if (!ex.direct_difficulty || *ex.direct_difficulty < 1 || *ex.direct_difficulty > 4)
            missing.push_back(ex.id);
    if (!missing.empty()) {
        std::string msg = "missing or out-of-range direct difficulty for " +
                          std::to_string(missing.size()) + " example(s):";
        for (const auto& id : missing) msg += " " + id;
        throw ValidationError(msg);
    }

    DifficultyAssignment out;
    out.granularity = Granularity::fine;
    out.source = DifficultySource::direct;
    for (const auto& ex : ds.examples)
        out.bins[ex.id] = static_cast<DifficultyLevel>(*ex.direct_difficulty - 1);
    return out;
}

struct TauResult {
    double tau = 0.0;
    DifficultyAssignment assignment;
    double realized_easy_fraction = 0.0;
    bool degenerate = false;    // all scores equal; everything binned hard
};

/// Chooses the confidence threshold tau so that the fraction of examples
/// scored strictly above it matches target_easy_fraction: with scores
/// sorted ascending, tau is the value at index floor((1-f)*N)-1, clamped
/// to [0, N-1]. Examples with score > tau are easy, the rest hard.
inline TauResult threshold_tau(const ConfidenceScore& scores, double target_easy_fraction,
                               DifficultySource source = DifficultySource::self_taught) {
    if (scores.empty()) throw ValidationError("threshold_tau: no scores");
    if (!(target_easy_fraction > 0.0 && target_easy_fraction < 1.0))
        throw ValidationError("threshold_tau: target easy fraction must be in (0,1)");

    const std::size_t n = scores.size();
    std::vector<double> sorted;
    sorted.reserve(n);
    for (const auto& [id, s] : scores) sorted.push_back(s);
    std::sort(sorted.begin(), sorted.end());

    long long idx = static_cast<long long>(std::floor((1.0 - target_easy_fraction) * n)) - 1;
    idx = std::clamp<long long>(idx, 0, static_cast<long long>(n) - 1);

    TauResult res;
    res.tau = sorted[static_cast<std::size_t>(idx)];
    res.assignment.granularity = Granularity::coarse;
    res.assignment.source = source;

    std::size_t easy = 0;
    for (const auto& [id, s] : scores) {
        const bool is_easy = s > res.tau;
        res.assignment.bins[id] = is_easy ? DifficultyLevel::easy : DifficultyLevel::hard;
        easy += is_easy;
    }
    res.realized_easy_fraction = static_cast<double>(easy) / static_cast<double>(n);
    res.degenerate = easy == 0 && sorted.front() == sorted.back();
    return res;
}

}  // namespace ccl
