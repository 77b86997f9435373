#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "ccl/dataset.hpp"
#include "ccl/difficulty.hpp"
#include "ccl/errors.hpp"

namespace ccl {

/// Tie-corrected Mann-Whitney ROC AUC. Scores rank the positive class;
/// tied scores get average ranks, so AUC counts ties as half-wins.
inline double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw ValidationError("roc_auc: scores and labels differ in length");
    if (scores.empty()) throw ValidationError("roc_auc: empty input");

    std::size_t n_pos = 0, n_neg = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!std::isfinite(scores[i])) throw ValidationError("roc_auc: non-finite score");
        if (labels[i] == 1)
            ++n_pos;
        else if (labels[i] == 0)
            ++n_neg;
        else
            throw ValidationError("roc_auc: labels must be 0 or 1");
    }
    if (n_pos == 0 || n_neg == 0)
        throw ValidationError("roc_auc: need both classes present");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Average ranks within tie groups; accumulate rank sum of positives.
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k)
            if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
        i = j + 1;
    }

    const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

/// Map overload: ids present in `scores` are evaluated against `gold`.
inline double roc_auc(const ConfidenceScore& scores, const std::map<std::string, GoldLabel>& gold) {
    std::vector<double> s;
    std::vector<int> y;
    s.reserve(scores.size());
    y.reserve(scores.size());
    for (const auto& [id, sc] : scores) {
        auto it = gold.find(id);
        if (it == gold.end()) throw ValidationError("roc_auc: no gold label for id " + id);
        s.push_back(sc);
        y.push_back(it->second.label);
    }
    return roc_auc(s, y);
}

/// Overall AUC plus one AUC per difficulty level. Levels whose stratum
/// holds only one class are recorded in `skipped` instead of per_level.
struct StratifiedAuc {
    double overall = 0.0;
    std::map<DifficultyLevel, double> per_level;
    std::vector<DifficultyLevel> skipped;
};

inline StratifiedAuc stratified_auc(const ConfidenceScore& scores,
                                    const std::map<std::string, GoldLabel>& gold,
                                    const DifficultyAssignment& assignment) {
    StratifiedAuc out;
    out.overall = roc_auc(scores, gold);

    std::map<DifficultyLevel, std::pair<std::vector<double>, std::vector<int>>> strata;
    for (const auto& [id, sc] : scores) {
        auto bin = assignment.bins.find(id);
        if (bin == assignment.bins.end())
            throw ValidationError("stratified_auc: no difficulty bin for id " + id);
        auto& [s, y] = strata[bin->second];
        s.push_back(sc);
        y.push_back(gold.at(id).label);
    }
    for (auto& [level, data] : strata) {
        auto& [s, y] = data;
        const bool has_pos = std::find(y.begin(), y.end(), 1) != y.end();
        const bool has_neg = std::find(y.begin(), y.end(), 0) != y.end();
        if (has_pos && has_neg)
            out.per_level[level] = roc_auc(s, y);
        else
            out.skipped.push_back(level);
    }
    return out;
}

/// Percent agreement between every annotator pair, plus each annotator's
/// agreement with the majority vote. Diagonal entries are NaN.
struct AgreementMatrix {
    std::vector<std::vector<double>> pairwise;       // K x K, percent
    double pairwise_mean = 0.0;                      // off-diagonal grand mean
    std::vector<double> majority_agreement;          // percent, per annotator
    double majority_mean = 0.0;
};

inline AgreementMatrix pairwise_agreement(const Dataset& ds,
                                          TiePolicy tie_policy = TiePolicy::error) {
    const std::size_t k = ds.num_annotators;
    if (k < 2) throw ValidationError("pairwise_agreement: need at least 2 annotators");
    if (ds.examples.empty()) throw ValidationError("pairwise_agreement: empty dataset");

    AgreementMatrix out;
    out.pairwise.assign(k, std::vector<double>(k, std::numeric_limits<double>::quiet_NaN()));
    const double n = static_cast<double>(ds.examples.size());

    double pair_total = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a + 1; b < k; ++b) {
            std::size_t same = 0;
            for (const auto& ex : ds.examples)
                same += ex.annotator_labels[a] == ex.annotator_labels[b];
            const double pct = 100.0 * static_cast<double>(same) / n;
            out.pairwise[a][b] = out.pairwise[b][a] = pct;
            pair_total += pct;
        }
    }
    out.pairwise_mean = pair_total / (static_cast<double>(k) * (k - 1) / 2.0);

    out.majority_agreement.assign(k, 0.0);
    for (const auto& ex : ds.examples) {
        const int maj = majority_vote(ex.annotator_labels, tie_policy).label;
        for (std::size_t a = 0; a < k; ++a)
            out.majority_agreement[a] += ex.annotator_labels[a] == maj;
    }
    double maj_total = 0.0;
    for (auto& v : out.majority_agreement) {
        v = 100.0 * v / n;
        maj_total += v;
    }
    out.majority_mean = maj_total / static_cast<double>(k);
    return out;
}

/// Cohen's kappa for two label sequences. Degenerate case where expected
/// agreement is 1 (both raters constant and equal) returns 1.
inline double cohens_kappa(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw ValidationError("cohens_kappa: length mismatch");
    if (a.empty()) throw ValidationError("cohens_kappa: empty input");

    const double n = static_cast<double>(a.size());
    std::map<int, double> pa, pb;
    double observed = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        pa[a[i]] += 1.0;
        pb[b[i]] += 1.0;
        observed += a[i] == b[i];
    }
    const double p_o = observed / n;
    double p_e = 0.0;
    for (const auto& [cls, ca] : pa) {
        auto it = pb.find(cls);
        if (it != pb.end()) p_e += (ca / n) * (it->second / n);
    }
    if (p_e >= 1.0) return 1.0;
    return (p_o - p_e) / (1.0 - p_e);
}

/// Kappa of thresholded scores against gold labels, swept over thresholds.
/// The model's label is 1 exactly when score > threshold.
struct KappaSweep {
    std::vector<double> thresholds;
    std::vector<double> kappas;
    double max_kappa = 0.0;
    double argmax_threshold = 0.0;
};

inline std::vector<double> default_kappa_thresholds() {
    return {0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
}

inline KappaSweep kappa_sweep(const ConfidenceScore& scores,
                              const std::map<std::string, GoldLabel>& gold,
                              const std::vector<double>& thresholds = default_kappa_thresholds()) {
    if (thresholds.empty()) throw ValidationError("kappa_sweep: no thresholds");
    std::vector<int> y;
    y.reserve(scores.size());
    for (const auto& [id, sc] : scores) {
        auto it = gold.find(id);
        if (it == gold.end()) throw ValidationError("kappa_sweep: no gold label for id " + id);
        y.push_back(it->second.label);
    }

    KappaSweep out;
    out.thresholds = thresholds;
    out.max_kappa = -std::numeric_limits<double>::infinity();
    for (double tau : thresholds) {
        std::vector<int> pred;
        pred.reserve(scores.size());
        for (const auto& [id, sc] : scores) pred.push_back(sc > tau ? 1 : 0);
        const double kap = cohens_kappa(pred, y);
        out.kappas.push_back(kap);
        if (kap > out.max_kappa) {
            out.max_kappa = kap;
            out.argmax_threshold = tau;
        }
    }
    return out;
}

/// Kappa of the thresholded model against every individual annotator,
/// swept over thresholds. mean_per_threshold averages across annotators.
struct AnnotatorKappaSweep {
    std::vector<double> thresholds;
    std::vector<std::vector<double>> per_annotator;   // [threshold][annotator]
    std::vector<double> mean_per_threshold;
    double max_mean_kappa = 0.0;
    double argmax_threshold = 0.0;
};

inline AnnotatorKappaSweep kappa_sweep_vs_annotators(
    const ConfidenceScore& scores, const Dataset& ds,
    const std::vector<double>& thresholds = default_kappa_thresholds()) {
    if (thresholds.empty()) throw ValidationError("kappa_sweep_vs_annotators: no thresholds");
    if (ds.examples.empty()) throw ValidationError("kappa_sweep_vs_annotators: empty dataset");
    const std::size_t k = ds.num_annotators;

    std::vector<double> s;
    std::vector<std::vector<int>> ann(k);
    s.reserve(ds.size());
    for (const auto& ex : ds.examples) {
        auto it = scores.find(ex.id);
        if (it == scores.end())
            throw ValidationError("kappa_sweep_vs_annotators: no score for id " + ex.id);
        s.push_back(it->second);
        for (std::size_t a = 0; a < k; ++a) ann[a].push_back(ex.annotator_labels[a]);
    }

    AnnotatorKappaSweep out;
    out.thresholds = thresholds;
    out.max_mean_kappa = -std::numeric_limits<double>::infinity();
    for (double tau : thresholds) {
        std::vector<int> pred;
        pred.reserve(s.size());
        for (double v : s) pred.push_back(v > tau ? 1 : 0);
        std::vector<double> row;
        row.reserve(k);
        double total = 0.0;
        for (std::size_t a = 0; a < k; ++a) {
            row.push_back(cohens_kappa(pred, ann[a]));
            total += row.back();
        }
        const double mean = total / static_cast<double>(k);
        out.per_annotator.push_back(std::move(row));
        out.mean_per_threshold.push_back(mean);
        if (mean > out.max_mean_kappa) {
            out.max_mean_kappa = mean;
            out.argmax_threshold = tau;
        }
    }
    return out;
}

/// Each annotator's mean pairwise kappa against the other annotators.
inline std::vector<double> annotator_mean_kappas(const Dataset& ds) {
    const std::size_t k = ds.num_annotators;
    if (k < 2) throw ValidationError("annotator_mean_kappas: need at least 2 annotators");
    if (ds.examples.empty()) throw ValidationError("annotator_mean_kappas: empty dataset");
    std::vector<std::vector<int>> ann(k);
    for (const auto& ex : ds.examples)
        for (std::size_t a = 0; a < k; ++a) ann[a].push_back(ex.annotator_labels[a]);
    std::vector<double> out(k, 0.0);
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a + 1; b < k; ++b) {
            const double kap = cohens_kappa(ann[a], ann[b]);
            out[a] += kap;
            out[b] += kap;
        }
    }
    for (auto& v : out) v /= static_cast<double>(k - 1);
    return out;
}

/// Each annotator's kappa against the majority vote of the remaining
/// annotators (ties in the reduced vote resolve to class 0).
inline std::vector<double> annotator_reference_kappas(const Dataset& ds) {
    const std::size_t k = ds.num_annotators;
    if (k < 3) throw ValidationError("annotator_reference_kappas: need at least 3 annotators");
    std::vector<double> out;
    out.reserve(k);
    for (std::size_t a = 0; a < k; ++a) {
        std::vector<int> own, rest_majority;
        own.reserve(ds.examples.size());
        rest_majority.reserve(ds.examples.size());
        for (const auto& ex : ds.examples) {
            std::vector<int> rest;
            rest.reserve(k - 1);
            for (std::size_t b = 0; b < k; ++b)
                if (b != a) rest.push_back(ex.annotator_labels[b]);
            own.push_back(ex.annotator_labels[a]);
            rest_majority.push_back(majority_vote(rest, TiePolicy::class0).label);
        }
        out.push_back(cohens_kappa(own, rest_majority));
    }
    return out;
}

/// Mean of the k best values (all values when fewer than k exist).
inline double top_k_mean(const std::vector<double>& values, std::size_t k = 5) {
    if (values.empty()) throw ValidationError("top_k_mean: empty input");
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const std::size_t take = std::min(k, sorted.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < take; ++i) sum += sorted[i];
    return sum / static_cast<double>(take);
}

/// Mean and sample standard deviation over per-seed statistics.
struct SeedSummary {
    double mean = 0.0;
    double std_dev = 0.0;
    std::size_t n = 0;
};

inline SeedSummary summarize_seeds(const std::vector<double>& values) {
    if (values.empty()) throw ValidationError("summarize_seeds: empty input");
    SeedSummary s;
    s.n = values.size();
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.n);
    if (s.n > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.std_dev = std::sqrt(ss / static_cast<double>(s.n - 1));
    }
    return s;
}

namespace detail {

/// Continued fraction for the regularized incomplete beta (modified
/// Lentz). Converges for x < (a+1)/(a+b+2).
inline double beta_cont_frac(double a, double b, double x) {
    constexpr int max_iter = 300;
    constexpr double eps = 1e-15;
    constexpr double tiny = 1e-300;

    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) return h;
    }
    throw NumericError("incomplete beta continued fraction failed to converge");
}

}  // namespace detail

/// Regularized incomplete beta function I_x(a, b).
inline double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0))
        throw ValidationError("regularized_incomplete_beta: a and b must be positive");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                             a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_cont_frac(a, b, x) / a;
    return 1.0 - front * detail::beta_cont_frac(b, a, 1.0 - x) / b;
}

/// Two-sided p-value of Student's t with df degrees of freedom.
inline double student_t_two_sided_p(double t, double df) {
    if (!(df > 0.0)) throw ValidationError("student_t_two_sided_p: df must be positive");
    if (!std::isfinite(t)) return 0.0;
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    double df = 0.0;
    bool underflow = false;   // p clamped at the representable floor
};

/// Welch's two-sample t-test (unequal variances), two-sided.
inline TTestResult t_test_two_sample(const std::vector<double>& x,
                                     const std::vector<double>& y) {
    if (x.size() < 2 || y.size() < 2)
        throw ValidationError("t_test_two_sample: need at least 2 values per sample");

    const auto sx = summarize_seeds(x);
    const auto sy = summarize_seeds(y);
    const double nx = static_cast<double>(sx.n), ny = static_cast<double>(sy.n);
    const double vx = sx.std_dev * sx.std_dev, vy = sy.std_dev * sy.std_dev;
    const double se2 = vx / nx + vy / ny;

    TTestResult res;
    if (se2 == 0.0) {
        // Both samples are constant. Equal means: no evidence of difference.
        if (sx.mean == sy.mean) {
            res.t = 0.0;
            res.p = 1.0;
            res.df = nx + ny - 2.0;
            return res;
        }
        res.t = sx.mean > sy.mean ? std::numeric_limits<double>::infinity()
                                  : -std::numeric_limits<double>::infinity();
        res.df = nx + ny - 2.0;
        res.p = 1e-300;
        res.underflow = true;
        return res;
    }

    res.t = (sx.mean - sy.mean) / std::sqrt(se2);
    const double num = se2 * se2;
    const double den = (vx / nx) * (vx / nx) / (nx - 1.0) + (vy / ny) * (vy / ny) / (ny - 1.0);
    res.df = num / den;
    res.p = student_t_two_sided_p(res.t, res.df);
    if (res.p < 1e-300) {
        res.p = 1e-300;
        res.underflow = true;
    }
    return res;
}

/// Conventional significance marker for a p-value.
inline std::string significance_stars(double p) {
    if (p <= 0.001) return "***";
    if (p <= 0.05) return "*";
    return "";
}

}  // namespace ccl
