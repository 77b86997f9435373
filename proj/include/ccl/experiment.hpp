#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ccl/dataset.hpp"
#include "ccl/dataset_io.hpp"
#include "ccl/difficulty.hpp"
#include "ccl/errors.hpp"
#include "ccl/learner.hpp"
#include "ccl/metrics.hpp"
#include "ccl/rng.hpp"
#include "ccl/schedule.hpp"
#include "ccl/scoring.hpp"
#include "ccl/synthgen.hpp"

namespace ccl {

/// One experiment arm: a named schedule recipe. `bins` applies to
/// single_stage arms, `hard_ratio` and `proxy` to two_stage arms.
struct ArmSpec {
    std::string name;
    ScheduleKind kind = ScheduleKind::single_stage;
    std::set<DifficultyLevel> bins = {DifficultyLevel::very_easy, DifficultyLevel::easy,
                                      DifficultyLevel::hard, DifficultyLevel::very_hard};
    double hard_ratio = 0.33;
    DifficultySource proxy = DifficultySource::agreement;
    int epochs_per_stage = 0;   // 0 = learner config epochs
};

/// The default arm grid: vanilla baseline, the single-stage subsets, both
/// staged curricula, the direct-annotation curriculum, and the size-matched
/// random control.
inline std::vector<ArmSpec> default_arms() {
    std::vector<ArmSpec> arms;
    ArmSpec vanilla;
    vanilla.name = "vanilla";
    arms.push_back(vanilla);

    ArmSpec s1;
    s1.name = "single_very_easy";
    s1.bins = {DifficultyLevel::very_easy};
    arms.push_back(s1);
    ArmSpec s2;
    s2.name = "single_very_easy_easy";
    s2.bins = {DifficultyLevel::very_easy, DifficultyLevel::easy};
    arms.push_back(s2);
    ArmSpec s3;
    s3.name = "single_very_easy_easy_hard";
    s3.bins = {DifficultyLevel::very_easy, DifficultyLevel::easy, DifficultyLevel::hard};
    arms.push_back(s3);

    ArmSpec cur;
    cur.name = "curriculum";
    cur.kind = ScheduleKind::curriculum;
    arms.push_back(cur);
    ArmSpec anti;
    anti.name = "anti";
    anti.kind = ScheduleKind::anti;
    arms.push_back(anti);
    ArmSpec direct;
    direct.name = "direct";
    direct.kind = ScheduleKind::direct;
    arms.push_back(direct);
    ArmSpec rnd;
    rnd.name = "random_control";
    rnd.kind = ScheduleKind::random_control;
    arms.push_back(rnd);
    return arms;
}

struct ExperimentConfig {
    std::string dataset_path;            // empty: generate from `gen`
    std::string pretrain_path;           // optional pretraining set for the transfer proxy
    GenConfig gen;
    double test_fraction = 0.3;
    bool resplit_per_seed = true;
    TiePolicy tie_policy = TiePolicy::error;
    LearnerConfig learner;
    std::vector<ArmSpec> arms = default_arms();
    std::string baseline_arm = "vanilla";
    std::vector<std::uint64_t> seeds = {1,  2,  3,  4,  5,  6,  7,  8,  9,  10,
                                        11, 12, 13, 14, 15, 16, 17, 18, 19, 20};
    std::uint64_t master_seed = 0;       // perturbs every derived seed
    std::vector<double> kappa_thresholds = default_kappa_thresholds();
    std::string kappa_arm = "curriculum";
    int kappa_stage = 3;                 // 1-based stage fed to the kappa sweep
    std::size_t top_k = 5;
};

inline void validate_experiment_config(const ExperimentConfig& cfg) {
    if (cfg.arms.empty()) throw ValidationError("experiment needs at least one arm");
    std::set<std::string> names;
    for (const auto& a : cfg.arms) {
        if (a.name.empty()) throw ValidationError("arm with empty name");
        if (!names.insert(a.name).second)
            throw ValidationError("duplicate arm name '" + a.name + "'");
        if (a.kind == ScheduleKind::two_stage && (!(a.hard_ratio > 0.0) || a.hard_ratio > 1.0))
            throw ValidationError("arm '" + a.name + "': hard_ratio must be in (0,1]");
        if (a.epochs_per_stage < 0)
            throw ValidationError("arm '" + a.name + "': epochs_per_stage must be >= 0");
    }
    if (!names.count(cfg.baseline_arm))
        throw ValidationError("baseline arm '" + cfg.baseline_arm + "' is not in the arm list");
    if (cfg.seeds.empty()) throw ValidationError("experiment needs at least one seed");
    std::set<std::uint64_t> distinct(cfg.seeds.begin(), cfg.seeds.end());
    if (distinct.size() != cfg.seeds.size()) throw ValidationError("seeds must be distinct");
    if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0))
        throw ValidationError("test_fraction must be in (0,1)");
    if (cfg.kappa_thresholds.empty()) throw ValidationError("kappa_thresholds must be non-empty");
    if (cfg.kappa_stage < 1) throw ValidationError("kappa_stage must be >= 1");
    if (cfg.top_k < 1) throw ValidationError("top_k must be >= 1");
    validate_config(cfg.learner);
}

inline nlohmann::json gen_config_to_json(const GenConfig& g) {
    return {{"num_examples", g.num_examples},
            {"num_groups", g.num_groups},
            {"feature_dim", g.feature_dim},
            {"num_annotators", g.num_annotators},
            {"class_prior", g.class_prior},
            {"difficulty_alpha", g.difficulty_alpha},
            {"difficulty_beta", g.difficulty_beta},
            {"class_mean_separation", g.class_mean_separation},
            {"feature_noise_std", g.feature_noise_std},
            {"annotator_p_min", g.annotator_p_min},
            {"annotator_p_max", g.annotator_p_max},
            {"per_annotator_bias", g.per_annotator_bias},
            {"direct_score_noise", g.direct_score_noise},
            {"seed", g.seed}};
}

inline GenConfig gen_config_from_json(const nlohmann::json& j) {
    GenConfig g;
    if (j.contains("num_examples")) g.num_examples = j.at("num_examples").get<std::size_t>();
    if (j.contains("num_groups")) g.num_groups = j.at("num_groups").get<std::size_t>();
    if (j.contains("feature_dim")) g.feature_dim = j.at("feature_dim").get<std::size_t>();
    if (j.contains("num_annotators"))
        g.num_annotators = j.at("num_annotators").get<std::size_t>();
    if (j.contains("class_prior")) g.class_prior = j.at("class_prior").get<double>();
    if (j.contains("difficulty_alpha"))
        g.difficulty_alpha = j.at("difficulty_alpha").get<double>();
    if (j.contains("difficulty_beta")) g.difficulty_beta = j.at("difficulty_beta").get<double>();
    if (j.contains("class_mean_separation"))
        g.class_mean_separation = j.at("class_mean_separation").get<double>();
    if (j.contains("feature_noise_std"))
        g.feature_noise_std = j.at("feature_noise_std").get<double>();
    if (j.contains("annotator_p_min"))
        g.annotator_p_min = j.at("annotator_p_min").get<double>();
    if (j.contains("annotator_p_max"))
        g.annotator_p_max = j.at("annotator_p_max").get<double>();
    if (j.contains("per_annotator_bias"))
        g.per_annotator_bias = j.at("per_annotator_bias").get<std::vector<double>>();
    if (j.contains("direct_score_noise"))
        g.direct_score_noise = j.at("direct_score_noise").get<double>();
    if (j.contains("seed")) g.seed = j.at("seed").get<std::uint64_t>();
    return g;
}

inline nlohmann::json learner_config_to_json(const LearnerConfig& c) {
    nlohmann::json j{{"hidden_sizes", c.hidden_sizes},
                     {"epochs", c.epochs},
                     {"initial_lr", c.initial_lr},
                     {"lr_decay", c.lr_decay},
                     {"batch_size", c.batch_size},
                     {"adam_beta1", c.adam_beta1},
                     {"adam_beta2", c.adam_beta2},
                     {"adam_eps", c.adam_eps},
                     {"augment_sigma", c.augment_sigma},
                     {"weight_init_scale", c.weight_init_scale},
                     {"seed", c.seed},
                     {"reinit_per_stage", c.reinit_per_stage}};
    if (c.init_seed) j["init_seed"] = *c.init_seed;
    return j;
}

inline LearnerConfig learner_config_from_json(const nlohmann::json& j) {
    LearnerConfig c;
    if (j.contains("hidden_sizes")) c.hidden_sizes = j.at("hidden_sizes").get<std::vector<int>>();
    if (j.contains("epochs")) c.epochs = j.at("epochs").get<int>();
    if (j.contains("initial_lr")) c.initial_lr = j.at("initial_lr").get<double>();
    if (j.contains("lr_decay")) c.lr_decay = j.at("lr_decay").get<double>();
    if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<int>();
    if (j.contains("adam_beta1")) c.adam_beta1 = j.at("adam_beta1").get<double>();
    if (j.contains("adam_beta2")) c.adam_beta2 = j.at("adam_beta2").get<double>();
    if (j.contains("adam_eps")) c.adam_eps = j.at("adam_eps").get<double>();
    if (j.contains("augment_sigma")) c.augment_sigma = j.at("augment_sigma").get<double>();
    if (j.contains("weight_init_scale"))
        c.weight_init_scale = j.at("weight_init_scale").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("init_seed") && !j.at("init_seed").is_null())
        c.init_seed = j.at("init_seed").get<std::uint64_t>();
    if (j.contains("reinit_per_stage"))
        c.reinit_per_stage = j.at("reinit_per_stage").get<bool>();
    return c;
}

inline nlohmann::json arm_to_json(const ArmSpec& a) {
    nlohmann::json j{{"name", a.name}, {"kind", to_string(a.kind)}};
    if (a.kind == ScheduleKind::single_stage) {
        nlohmann::json bins = nlohmann::json::array();
        for (auto b : a.bins) bins.push_back(to_string(b));
        j["bins"] = bins;
    }
    if (a.kind == ScheduleKind::two_stage) {
        j["hard_ratio"] = a.hard_ratio;
        j["proxy"] = to_string(a.proxy);
    }
    if (a.epochs_per_stage > 0) j["epochs_per_stage"] = a.epochs_per_stage;
    return j;
}

inline ArmSpec arm_from_json(const nlohmann::json& j) {
    ArmSpec a;
    a.name = j.at("name").get<std::string>();
    a.kind = parse_schedule_kind(j.at("kind").get<std::string>());
    if (j.contains("bins")) {
        a.bins.clear();
        for (const auto& b : j.at("bins"))
            a.bins.insert(parse_difficulty_level(b.get<std::string>()));
    }
    if (j.contains("hard_ratio")) a.hard_ratio = j.at("hard_ratio").get<double>();
    if (j.contains("proxy")) a.proxy = parse_difficulty_source(j.at("proxy").get<std::string>());
    if (j.contains("epochs_per_stage"))
        a.epochs_per_stage = j.at("epochs_per_stage").get<int>();
    return a;
}

inline nlohmann::json experiment_config_to_json(const ExperimentConfig& c) {
    nlohmann::json arms = nlohmann::json::array();
    for (const auto& a : c.arms) arms.push_back(arm_to_json(a));
    return {{"dataset", c.dataset_path},
            {"pretrain_dataset", c.pretrain_path},
            {"generator", gen_config_to_json(c.gen)},
            {"test_fraction", c.test_fraction},
            {"resplit_per_seed", c.resplit_per_seed},
            {"tie_policy", c.tie_policy == TiePolicy::error ? "error" : "class0"},
            {"learner", learner_config_to_json(c.learner)},
            {"arms", arms},
            {"baseline_arm", c.baseline_arm},
            {"seeds", c.seeds},
            {"master_seed", c.master_seed},
            {"kappa",
             {{"thresholds", c.kappa_thresholds},
              {"arm", c.kappa_arm},
              {"stage", c.kappa_stage}}},
            {"top_k", c.top_k}};
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    if (j.contains("dataset")) c.dataset_path = j.at("dataset").get<std::string>();
    if (j.contains("pretrain_dataset"))
        c.pretrain_path = j.at("pretrain_dataset").get<std::string>();
    if (j.contains("generator")) c.gen = gen_config_from_json(j.at("generator"));
    if (j.contains("test_fraction")) c.test_fraction = j.at("test_fraction").get<double>();
    if (j.contains("resplit_per_seed"))
        c.resplit_per_seed = j.at("resplit_per_seed").get<bool>();
    if (j.contains("tie_policy"))
        c.tie_policy =
            j.at("tie_policy").get<std::string>() == "class0" ? TiePolicy::class0
                                                              : TiePolicy::error;
    if (j.contains("learner")) c.learner = learner_config_from_json(j.at("learner"));
    if (j.contains("arms")) {
        c.arms.clear();
        for (const auto& a : j.at("arms")) c.arms.push_back(arm_from_json(a));
    }
    if (j.contains("baseline_arm")) c.baseline_arm = j.at("baseline_arm").get<std::string>();
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("master_seed")) c.master_seed = j.at("master_seed").get<std::uint64_t>();
    if (j.contains("kappa")) {
        const auto& k = j.at("kappa");
        if (k.contains("thresholds"))
            c.kappa_thresholds = k.at("thresholds").get<std::vector<double>>();
        if (k.contains("arm")) c.kappa_arm = k.at("arm").get<std::string>();
        if (k.contains("stage")) c.kappa_stage = k.at("stage").get<int>();
    }
    if (j.contains("top_k")) c.top_k = j.at("top_k").get<std::size_t>();
    return c;
}

/// Materializes the schedule an arm spec describes for one training set.
/// `arm_seed` drives any sampling the builder needs (random control
/// subsets, two-stage hard draws, proxy scorer training).
inline CurriculumSchedule build_arm_schedule(const ArmSpec& spec, const Dataset& train,
                                             const LearnerConfig& learner,
                                             std::uint64_t arm_seed,
                                             const std::optional<Dataset>& pretrain,
                                             TiePolicy tie_policy) {
    const int E = spec.epochs_per_stage > 0 ? spec.epochs_per_stage : learner.epochs;
    switch (spec.kind) {
        case ScheduleKind::single_stage:
            return build_single_stage(bin_by_agreement(train, Granularity::fine), spec.bins, E);
        case ScheduleKind::curriculum:
            return build_staged(bin_by_agreement(train, Granularity::fine),
                                StageDirection::easy_first, E);
        case ScheduleKind::anti:
            return build_staged(bin_by_agreement(train, Granularity::fine),
                                StageDirection::hard_first, E);
        case ScheduleKind::direct:
            return build_staged(bin_by_direct_annotation(train), StageDirection::easy_first, E);
        case ScheduleKind::random_control: {
            const auto fine = bin_by_agreement(train, Granularity::fine);
            std::map<DifficultyLevel, std::size_t> bin_sizes;
            for (const auto& [id, level] : fine.bins) ++bin_sizes[level];
            std::vector<std::size_t> sizes;
            std::size_t acc = 0;
            for (auto level : {DifficultyLevel::very_easy, DifficultyLevel::easy,
                               DifficultyLevel::hard, DifficultyLevel::very_hard}) {
                acc += bin_sizes[level];
                sizes.push_back(acc);
            }
            std::vector<std::string> ids;
            for (const auto& ex : train.examples) ids.push_back(ex.id);
            return build_random_control(ids, sizes, E, arm_seed);
        }
        case ScheduleKind::two_stage: {
            const double natural_easy = easy_fraction(train);
            DifficultyAssignment coarse;
            if (spec.proxy == DifficultySource::agreement) {
                coarse = bin_by_agreement(train, Granularity::coarse);
            } else if (spec.proxy == DifficultySource::self_taught) {
                const auto scores = score_self_taught(train, learner,
                                                      derive_seed(arm_seed, "score"), tie_policy);
                coarse = threshold_tau(scores, natural_easy, DifficultySource::self_taught)
                             .assignment;
            } else if (spec.proxy == DifficultySource::transfer) {
                if (!pretrain)
                    throw ValidationError("arm '" + spec.name +
                                          "': transfer proxy needs a pretraining dataset");
                const auto scores = score_transfer(train, *pretrain, learner,
                                                   derive_seed(arm_seed, "score"), tie_policy);
                coarse =
                    threshold_tau(scores, natural_easy, DifficultySource::transfer).assignment;
            } else {
                throw ValidationError("arm '" + spec.name + "': unsupported two-stage proxy");
            }
            return build_two_stage(coarse, spec.hard_ratio, E, arm_seed);
        }
    }
    throw ValidationError("arm '" + spec.name + "': unknown schedule kind");
}

struct StageReport {
    int stage = 1;
    int epochs = 0;
    std::vector<double> auc_raw;                            // per seed
    SeedSummary auc;
    std::map<DifficultyLevel, std::vector<double>> per_level_raw;
    std::map<DifficultyLevel, SeedSummary> per_level;
    bool has_ttest = false;
    TTestResult vs_baseline;
};

struct ArmReport {
    ArmSpec spec;
    std::vector<StageReport> stages;
};

/// Mean-over-annotators kappa curve for one arm's model at one stage.
struct KappaArmCurve {
    std::string arm;
    int stage = 1;
    std::vector<std::vector<double>> raw;   // [threshold][seed]
    std::vector<SeedSummary> summary;       // per threshold
};

struct ExperimentReport {
    nlohmann::json config_json;
    std::string config_hash;
    std::string generated_at;
    bool partial = false;
    std::vector<std::uint64_t> seeds;
    std::string baseline_arm;
    std::vector<ArmReport> arms;
    std::vector<double> kappa_thresholds;
    std::vector<KappaArmCurve> kappa_curves;
    std::vector<std::vector<double>> annotator_reference_raw;   // [annotator][seed]
    std::vector<SeedSummary> annotator_reference;
    std::string determinism_hash;
};

namespace detail {

inline std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string utc_timestamp() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

[[noreturn]] inline void rethrow_with_context(const std::string& ctx) {
    try {
        throw;
    } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + ctx);
    } catch (const IoError& e) {
        throw IoError(std::string(e.what()) + ctx);
    } catch (const ValidationError& e) {
        throw ValidationError(std::string(e.what()) + ctx);
    } catch (const Error& e) {
        throw Error(std::string(e.what()) + ctx);
    }
}

/// Wraps an evaluator so the model is snapshotted at given global epochs.
inline Evaluator with_snapshots(Evaluator inner, std::vector<int> snap_epochs,
                                std::shared_ptr<std::vector<Model>> out) {
    auto counter = std::make_shared<int>(0);
    return [inner = std::move(inner), snap_epochs = std::move(snap_epochs), out,
            counter](const Model& m) {
        EpochEval ev = inner(m);
        if (std::find(snap_epochs.begin(), snap_epochs.end(), *counter) != snap_epochs.end())
            out->push_back(m);
        ++*counter;
        return ev;
    };
}

/// Per-(arm, seed) results gathered during the run.
struct Cell {
    std::vector<int> stage_epochs;
    std::vector<double> stage_auc;                                  // top-k per stage
    std::vector<std::map<DifficultyLevel, double>> stage_per_level;
    std::optional<std::vector<double>> kappa_curve;                 // per threshold
    int kappa_stage = 0;
};

inline std::vector<double> top_k_per_stage_level(const TrainingLog& log, int stage,
                                                 DifficultyLevel level) {
    std::vector<double> vals;
    for (const auto& r : log.epochs) {
        if (r.stage != stage) continue;
        auto it = r.auc_per_level.find(level);
        if (it != r.auc_per_level.end() && std::isfinite(it->second))
            vals.push_back(it->second);
    }
    return vals;
}

}  // namespace detail

/// Runs the full grid: per seed, one shared group split and one shared
/// model init; per arm, the schedule named by its spec. Collects per-stage
/// top-k AUCs and kappa curves, then aggregates across seeds with Welch
/// t-tests against the baseline arm's final stage. If a cell fails, the
/// partial aggregate is handed to `partial_sink` before the error (with
/// arm/seed context) propagates.
inline ExperimentReport run(
    const ExperimentConfig& config,
    const std::function<void(const ExperimentReport&)>& partial_sink = {}) {
    validate_experiment_config(config);

    const Dataset base = config.dataset_path.empty() ? generate(config.gen)
                                                     : load_dataset(config.dataset_path);

    // Surrogate pretraining set for the transfer proxy, shared by all seeds.
    std::optional<Dataset> pretrain;
    const bool needs_pretrain =
        std::any_of(config.arms.begin(), config.arms.end(), [](const ArmSpec& a) {
            return a.kind == ScheduleKind::two_stage && a.proxy == DifficultySource::transfer;
        });
    if (needs_pretrain) {
        if (!config.pretrain_path.empty()) {
            pretrain = load_dataset(config.pretrain_path);
        } else if (config.dataset_path.empty()) {
            GenConfig pg = config.gen;
            pg.seed = derive_seed(config.gen.seed, "pretrain");
            pretrain = generate(pg);
        } else {
            throw ValidationError(
                "transfer proxy needs pretrain_dataset when the dataset comes from a file");
        }
    }

    const std::size_t n_arms = config.arms.size();
    std::vector<std::vector<detail::Cell>> cells(n_arms);   // [arm][completed seed]
    std::vector<std::vector<double>> annotator_ref_rows;    // [seed][annotator]

    auto aggregate = [&](bool partial) {
        ExperimentReport rep;
        rep.config_json = experiment_config_to_json(config);
        rep.config_hash = detail::hash_hex(fnv1a64(rep.config_json.dump()));
        rep.partial = partial;
        rep.seeds = config.seeds;
        rep.baseline_arm = config.baseline_arm;
        rep.kappa_thresholds = config.kappa_thresholds;

        // Baseline raw values: final stage of the baseline arm.
        std::vector<double> baseline_raw;
        for (std::size_t ai = 0; ai < n_arms; ++ai) {
            if (config.arms[ai].name != config.baseline_arm) continue;
            for (const auto& cell : cells[ai])
                if (!cell.stage_auc.empty()) baseline_raw.push_back(cell.stage_auc.back());
        }

        for (std::size_t ai = 0; ai < n_arms; ++ai) {
            ArmReport ar;
            ar.spec = config.arms[ai];
            const auto& arm_cells = cells[ai];
            if (!arm_cells.empty()) {
                const std::size_t n_stages = arm_cells.front().stage_auc.size();
                for (std::size_t s = 0; s < n_stages; ++s) {
                    StageReport sr;
                    sr.stage = static_cast<int>(s) + 1;
                    sr.epochs = arm_cells.front().stage_epochs[s];
                    for (const auto& cell : arm_cells) sr.auc_raw.push_back(cell.stage_auc[s]);
                    sr.auc = summarize_seeds(sr.auc_raw);
                    for (const auto& cell : arm_cells)
                        for (const auto& [level, v] : cell.stage_per_level[s])
                            sr.per_level_raw[level].push_back(v);
                    for (const auto& [level, raw] : sr.per_level_raw)
                        sr.per_level[level] = summarize_seeds(raw);
                    const bool is_baseline_final =
                        ar.spec.name == config.baseline_arm && s + 1 == n_stages;
                    if (!is_baseline_final && ar.spec.name != config.baseline_arm &&
                        sr.auc_raw.size() >= 2 && baseline_raw.size() >= 2) {
                        sr.vs_baseline = t_test_two_sample(sr.auc_raw, baseline_raw);
                        sr.has_ttest = true;
                    }
                    ar.stages.push_back(std::move(sr));
                }
            }
            rep.arms.push_back(std::move(ar));
        }

        // Kappa curves for the arms that recorded them.
        for (std::size_t ai = 0; ai < n_arms; ++ai) {
            const auto& arm_cells = cells[ai];
            if (arm_cells.empty() || !arm_cells.front().kappa_curve) continue;
            KappaArmCurve curve;
            curve.arm = config.arms[ai].name;
            curve.stage = arm_cells.front().kappa_stage;
            curve.raw.assign(config.kappa_thresholds.size(), {});
            for (const auto& cell : arm_cells) {
                if (!cell.kappa_curve) continue;
                for (std::size_t t = 0; t < cell.kappa_curve->size(); ++t)
                    curve.raw[t].push_back((*cell.kappa_curve)[t]);
            }
            for (const auto& raw : curve.raw) curve.summary.push_back(summarize_seeds(raw));
            rep.kappa_curves.push_back(std::move(curve));
        }

        if (!annotator_ref_rows.empty()) {
            const std::size_t k = annotator_ref_rows.front().size();
            rep.annotator_reference_raw.assign(k, {});
            for (const auto& row : annotator_ref_rows)
                for (std::size_t a = 0; a < k; ++a)
                    rep.annotator_reference_raw[a].push_back(row[a]);
            for (const auto& raw : rep.annotator_reference_raw)
                rep.annotator_reference.push_back(summarize_seeds(raw));
        }
        return rep;
    };

    std::string ctx;
    try {
        for (std::size_t si = 0; si < config.seeds.size(); ++si) {
            const std::uint64_t s = config.seeds[si];
            ctx = " (seed " + std::to_string(s) + ")";
            const std::uint64_t root = derive_seed(config.master_seed, "seed", s);
            const std::uint64_t split_root =
                config.resplit_per_seed
                    ? root
                    : derive_seed(config.master_seed, "seed", config.seeds.front());

            auto [train, test] = split_by_group(base, config.test_fraction, split_root);
            const auto gold_train = gold_labels(train, config.tie_policy);
            const auto gold_test = gold_labels(test, config.tie_policy);
            const auto test_fine = bin_by_agreement(test, Granularity::fine);
            const auto base_eval = make_test_evaluator(test, gold_test, test_fine);

            annotator_ref_rows.push_back(annotator_mean_kappas(test));

            for (std::size_t ai = 0; ai < n_arms; ++ai) {
                const auto& spec = config.arms[ai];
                ctx = " (arm " + spec.name + ", seed " + std::to_string(s) + ")";

                CurriculumSchedule sched = build_arm_schedule(
                    spec, train, config.learner, derive_seed(root, spec.name), pretrain,
                    config.tie_policy);

                LearnerConfig lc = config.learner;
                lc.seed = derive_seed(root, spec.name);
                lc.init_seed = derive_seed(root, "init");

                const bool wants_kappa =
                    spec.name == config.baseline_arm || spec.name == config.kappa_arm;
                auto snaps = std::make_shared<std::vector<Model>>();
                Evaluator evaluator = base_eval;
                std::vector<int> snap_epochs;
                int kappa_stage = 0;
                if (wants_kappa) {
                    const int n_stages = static_cast<int>(sched.stages.size());
                    kappa_stage = spec.name == config.kappa_arm
                                      ? std::min(config.kappa_stage, n_stages)
                                      : n_stages;
                    int cum = 0;
                    for (int st = 0; st < kappa_stage; ++st) cum += sched.stages[st].epochs;
                    snap_epochs.push_back(cum - 1);
                    evaluator = detail::with_snapshots(base_eval, snap_epochs, snaps);
                }

                auto [model, log] = train_schedule(train, gold_train, sched, lc, evaluator);

                detail::Cell cell;
                for (const auto& stage : sched.stages) {
                    cell.stage_epochs.push_back(stage.epochs);
                    std::vector<double> overall;
                    for (const auto& r : log.epochs)
                        if (r.stage == stage.index && std::isfinite(r.auc_overall))
                            overall.push_back(r.auc_overall);
                    cell.stage_auc.push_back(top_k_mean(overall, config.top_k));
                    std::map<DifficultyLevel, double> per_level;
                    for (auto level : {DifficultyLevel::very_easy, DifficultyLevel::easy,
                                       DifficultyLevel::hard, DifficultyLevel::very_hard}) {
                        const auto vals =
                            detail::top_k_per_stage_level(log, stage.index, level);
                        if (!vals.empty()) per_level[level] = top_k_mean(vals, config.top_k);
                    }
                    cell.stage_per_level.push_back(std::move(per_level));
                }
                if (wants_kappa) {
                    if (snaps->empty())
                        throw NumericError("kappa snapshot missing for arm " + spec.name);
                    const auto scores = predict_scores(snaps->front(), test);
                    const auto sweep =
                        kappa_sweep_vs_annotators(scores, test, config.kappa_thresholds);
                    cell.kappa_curve = sweep.mean_per_threshold;
                    cell.kappa_stage = kappa_stage;
                }
                cells[ai].push_back(std::move(cell));
            }
        }
    } catch (...) {
        if (partial_sink) {
            ExperimentReport partial = aggregate(true);
            partial.generated_at = detail::utc_timestamp();
            partial_sink(partial);
        }
        detail::rethrow_with_context(ctx);
    }

    ExperimentReport rep = aggregate(false);
    rep.generated_at = detail::utc_timestamp();
    return rep;
}

inline nlohmann::json seed_summary_to_json(const SeedSummary& s) {
    return {{"mean", s.mean}, {"std", s.std_dev}, {"n", s.n}};
}

inline SeedSummary seed_summary_from_json(const nlohmann::json& j) {
    SeedSummary s;
    s.mean = j.at("mean").get<double>();
    s.std_dev = j.at("std").get<double>();
    s.n = j.at("n").get<std::size_t>();
    return s;
}

inline nlohmann::json experiment_report_to_json(const ExperimentReport& rep) {
    nlohmann::json arms = nlohmann::json::array();
    for (const auto& ar : rep.arms) {
        nlohmann::json stages = nlohmann::json::array();
        for (const auto& sr : ar.stages) {
            nlohmann::json per_level, per_level_raw;
            for (const auto& [level, summary] : sr.per_level)
                per_level[to_string(level)] = seed_summary_to_json(summary);
            for (const auto& [level, raw] : sr.per_level_raw)
                per_level_raw[to_string(level)] = raw;
            nlohmann::json js{{"stage", sr.stage},
                              {"epochs", sr.epochs},
                              {"auc", seed_summary_to_json(sr.auc)},
                              {"auc_raw", sr.auc_raw},
                              {"per_level", per_level},
                              {"per_level_raw", per_level_raw}};
            if (sr.has_ttest)
                js["vs_baseline"] = {{"t", sr.vs_baseline.t},
                                     {"p", sr.vs_baseline.p},
                                     {"df", sr.vs_baseline.df},
                                     {"underflow", sr.vs_baseline.underflow},
                                     {"stars", significance_stars(sr.vs_baseline.p)}};
            stages.push_back(std::move(js));
        }
        arms.push_back({{"spec", arm_to_json(ar.spec)}, {"stages", stages}});
    }

    nlohmann::json curves = nlohmann::json::array();
    for (const auto& c : rep.kappa_curves) {
        nlohmann::json summary = nlohmann::json::array();
        for (const auto& s : c.summary) summary.push_back(seed_summary_to_json(s));
        curves.push_back(
            {{"arm", c.arm}, {"stage", c.stage}, {"raw", c.raw}, {"summary", summary}});
    }
    nlohmann::json annref = nlohmann::json::array();
    for (const auto& s : rep.annotator_reference) annref.push_back(seed_summary_to_json(s));

    nlohmann::json j{{"type", "experiment"},
                     {"config", rep.config_json},
                     {"config_hash", rep.config_hash},
                     {"generated_at", rep.generated_at},
                     {"partial", rep.partial},
                     {"seeds", rep.seeds},
                     {"baseline_arm", rep.baseline_arm},
                     {"arms", arms},
                     {"kappa",
                      {{"thresholds", rep.kappa_thresholds},
                       {"curves", curves},
                       {"annotator_reference_raw", rep.annotator_reference_raw},
                       {"annotator_reference", annref}}}};
    nlohmann::json hashed = j;
    hashed.erase("generated_at");
    j["determinism_hash"] = detail::hash_hex(fnv1a64(hashed.dump()));
    return j;
}

/// Two-stage pacing sweep: per difficulty proxy and hard ratio, the
/// stage-2 top-k AUC aggregated over seeds, next to the single-stage
/// baseline trained on all data.
struct RatioSweepReport {
    nlohmann::json config_json;
    std::string config_hash;
    std::string generated_at;
    std::vector<std::uint64_t> seeds;
    std::vector<double> ratios;
    std::vector<std::string> proxies;
    std::vector<std::vector<std::vector<double>>> raw;   // [proxy][ratio][seed]
    std::vector<std::vector<SeedSummary>> summary;       // [proxy][ratio]
    std::vector<double> baseline_raw;                    // per seed
    SeedSummary baseline;
    std::string determinism_hash;
};

inline RatioSweepReport run_ratio_sweep(const ExperimentConfig& config,
                                        const std::vector<double>& ratios) {
    if (ratios.empty()) throw ValidationError("ratio sweep needs at least one ratio");
    for (double r : ratios)
        if (!(r > 0.0) || r > 1.0) throw ValidationError("ratios must lie in (0, 1]");
    if (config.seeds.empty()) throw ValidationError("sweep needs at least one seed");
    if (std::set<std::uint64_t>(config.seeds.begin(), config.seeds.end()).size() !=
        config.seeds.size())
        throw ValidationError("seeds must be distinct");
    if (!(config.test_fraction > 0.0 && config.test_fraction < 1.0))
        throw ValidationError("test_fraction must be in (0,1)");
    validate_config(config.learner);

    const Dataset base = config.dataset_path.empty() ? generate(config.gen)
                                                     : load_dataset(config.dataset_path);
    std::optional<Dataset> pretrain;
    if (!config.pretrain_path.empty()) {
        pretrain = load_dataset(config.pretrain_path);
    } else if (config.dataset_path.empty()) {
        GenConfig pg = config.gen;
        pg.seed = derive_seed(config.gen.seed, "pretrain");
        pretrain = generate(pg);
    } else {
        throw ValidationError(
            "ratio sweep's transfer proxy needs pretrain_dataset for file datasets");
    }

    const std::vector<std::string> proxies{"agreement", "self_taught", "transfer"};
    RatioSweepReport rep;
    rep.seeds = config.seeds;
    rep.ratios = ratios;
    rep.proxies = proxies;
    rep.raw.assign(proxies.size(), std::vector<std::vector<double>>(ratios.size()));

    std::string ctx;
    try {
        for (const std::uint64_t s : config.seeds) {
            ctx = " (seed " + std::to_string(s) + ")";
            const std::uint64_t root = derive_seed(config.master_seed, "seed", s);
            const std::uint64_t split_root =
                config.resplit_per_seed
                    ? root
                    : derive_seed(config.master_seed, "seed", config.seeds.front());
            auto [train, test] = split_by_group(base, config.test_fraction, split_root);
            const auto gold_train = gold_labels(train, config.tie_policy);
            const auto gold_test = gold_labels(test, config.tie_policy);
            const auto test_fine = bin_by_agreement(test, Granularity::fine);
            const auto evaluator = make_test_evaluator(test, gold_test, test_fine);
            const double natural_easy = easy_fraction(train);
            const int E = config.learner.epochs;

            auto run_one = [&](const CurriculumSchedule& sched, std::uint64_t train_seed) {
                LearnerConfig lc = config.learner;
                lc.seed = train_seed;
                lc.init_seed = derive_seed(root, "init");
                auto [model, log] = train_schedule(train, gold_train, sched, lc, evaluator);
                std::vector<double> overall;
                const int last = sched.stages.back().index;
                for (const auto& r : log.epochs)
                    if (r.stage == last && std::isfinite(r.auc_overall))
                        overall.push_back(r.auc_overall);
                return top_k_mean(overall, config.top_k);
            };

            // Baseline: one stage over everything.
            {
                ctx = " (sweep baseline, seed " + std::to_string(s) + ")";
                const auto train_fine = bin_by_agreement(train, Granularity::fine);
                const auto sched = build_single_stage(
                    train_fine,
                    {DifficultyLevel::very_easy, DifficultyLevel::easy, DifficultyLevel::hard,
                     DifficultyLevel::very_hard},
                    E);
                rep.baseline_raw.push_back(run_one(sched, derive_seed(root, "sweep/baseline")));
            }

            // One coarse assignment per proxy, shared across ratios.
            std::vector<DifficultyAssignment> assignments;
            for (const auto& proxy : proxies) {
                ctx = " (sweep proxy " + proxy + ", seed " + std::to_string(s) + ")";
                if (proxy == "agreement") {
                    assignments.push_back(bin_by_agreement(train, Granularity::coarse));
                } else if (proxy == "self_taught") {
                    const auto scores =
                        score_self_taught(train, config.learner,
                                          derive_seed(root, "sweep/self_taught/score"),
                                          config.tie_policy);
                    assignments.push_back(
                        threshold_tau(scores, natural_easy, DifficultySource::self_taught)
                            .assignment);
                } else {
                    const auto scores = score_transfer(
                        train, *pretrain, config.learner,
                        derive_seed(root, "sweep/transfer/score"), config.tie_policy);
                    assignments.push_back(
                        threshold_tau(scores, natural_easy, DifficultySource::transfer)
                            .assignment);
                }
            }

            for (std::size_t pi = 0; pi < proxies.size(); ++pi) {
                for (std::size_t ri = 0; ri < ratios.size(); ++ri) {
                    ctx = " (sweep proxy " + proxies[pi] + ", ratio " +
                          std::to_string(ratios[ri]) + ", seed " + std::to_string(s) + ")";
                    const std::uint64_t cell_seed = derive_seed(
                        derive_seed(root, "sweep/" + proxies[pi]), std::to_string(ratios[ri]));
                    const auto sched =
                        build_two_stage(assignments[pi], ratios[ri], E, cell_seed);
                    rep.raw[pi][ri].push_back(run_one(sched, cell_seed));
                }
            }
        }
    } catch (...) {
        detail::rethrow_with_context(ctx);
    }

    for (const auto& per_ratio : rep.raw) {
        std::vector<SeedSummary> row;
        for (const auto& vals : per_ratio) row.push_back(summarize_seeds(vals));
        rep.summary.push_back(std::move(row));
    }
    rep.baseline = summarize_seeds(rep.baseline_raw);
    rep.config_json = experiment_config_to_json(config);
    rep.config_hash = detail::hash_hex(fnv1a64(rep.config_json.dump()));
    rep.generated_at = detail::utc_timestamp();
    return rep;
}

inline nlohmann::json sweep_report_to_json(const RatioSweepReport& rep) {
    nlohmann::json summary = nlohmann::json::array();
    for (const auto& row : rep.summary) {
        nlohmann::json jr = nlohmann::json::array();
        for (const auto& s : row) jr.push_back(seed_summary_to_json(s));
        summary.push_back(std::move(jr));
    }
    nlohmann::json j{{"type", "ratio_sweep"},
                     {"config", rep.config_json},
                     {"config_hash", rep.config_hash},
                     {"generated_at", rep.generated_at},
                     {"seeds", rep.seeds},
                     {"ratios", rep.ratios},
                     {"proxies", rep.proxies},
                     {"raw", rep.raw},
                     {"summary", summary},
                     {"baseline_raw", rep.baseline_raw},
                     {"baseline", seed_summary_to_json(rep.baseline)}};
    nlohmann::json hashed = j;
    hashed.erase("generated_at");
    j["determinism_hash"] = detail::hash_hex(fnv1a64(hashed.dump()));
    return j;
}

inline RatioSweepReport sweep_report_from_json(const nlohmann::json& j) {
    RatioSweepReport rep;
    try {
        if (j.at("type").get<std::string>() != "ratio_sweep")
            throw SchemaError("not a ratio sweep report");
        rep.config_json = j.at("config");
        rep.config_hash = j.at("config_hash").get<std::string>();
        rep.generated_at = j.at("generated_at").get<std::string>();
        rep.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        rep.ratios = j.at("ratios").get<std::vector<double>>();
        rep.proxies = j.at("proxies").get<std::vector<std::string>>();
        rep.raw = j.at("raw").get<std::vector<std::vector<std::vector<double>>>>();
        for (const auto& row : j.at("summary")) {
            std::vector<SeedSummary> r;
            for (const auto& s : row) r.push_back(seed_summary_from_json(s));
            rep.summary.push_back(std::move(r));
        }
        rep.baseline_raw = j.at("baseline_raw").get<std::vector<double>>();
        rep.baseline = seed_summary_from_json(j.at("baseline"));
        rep.determinism_hash = j.at("determinism_hash").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("bad ratio sweep report json: ") + e.what());
    }
    return rep;
}

inline ExperimentReport experiment_report_from_json(const nlohmann::json& j) {
    ExperimentReport rep;
    try {
        if (j.at("type").get<std::string>() != "experiment")
            throw SchemaError("not an experiment report");
        rep.config_json = j.at("config");
        rep.config_hash = j.at("config_hash").get<std::string>();
        rep.generated_at = j.at("generated_at").get<std::string>();
        rep.partial = j.at("partial").get<bool>();
        rep.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        rep.baseline_arm = j.at("baseline_arm").get<std::string>();
        for (const auto& ja : j.at("arms")) {
            ArmReport ar;
            ar.spec = arm_from_json(ja.at("spec"));
            for (const auto& js : ja.at("stages")) {
                StageReport sr;
                sr.stage = js.at("stage").get<int>();
                sr.epochs = js.at("epochs").get<int>();
                sr.auc = seed_summary_from_json(js.at("auc"));
                sr.auc_raw = js.at("auc_raw").get<std::vector<double>>();
                for (const auto& [name, val] : js.at("per_level").items())
                    sr.per_level[parse_difficulty_level(name)] = seed_summary_from_json(val);
                for (const auto& [name, val] : js.at("per_level_raw").items())
                    sr.per_level_raw[parse_difficulty_level(name)] =
                        val.get<std::vector<double>>();
                if (js.contains("vs_baseline")) {
                    sr.has_ttest = true;
                    sr.vs_baseline.t = js.at("vs_baseline").at("t").get<double>();
                    sr.vs_baseline.p = js.at("vs_baseline").at("p").get<double>();
                    sr.vs_baseline.df = js.at("vs_baseline").at("df").get<double>();
                    sr.vs_baseline.underflow =
                        js.at("vs_baseline").at("underflow").get<bool>();
                }
                ar.stages.push_back(std::move(sr));
            }
            rep.arms.push_back(std::move(ar));
        }
        const auto& k = j.at("kappa");
        rep.kappa_thresholds = k.at("thresholds").get<std::vector<double>>();
        for (const auto& jc : k.at("curves")) {
            KappaArmCurve c;
            c.arm = jc.at("arm").get<std::string>();
            c.stage = jc.at("stage").get<int>();
            c.raw = jc.at("raw").get<std::vector<std::vector<double>>>();
            for (const auto& s : jc.at("summary")) c.summary.push_back(seed_summary_from_json(s));
            rep.kappa_curves.push_back(std::move(c));
        }
        rep.annotator_reference_raw =
            k.at("annotator_reference_raw").get<std::vector<std::vector<double>>>();
        for (const auto& s : k.at("annotator_reference"))
            rep.annotator_reference.push_back(seed_summary_from_json(s));
        rep.determinism_hash = j.at("determinism_hash").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("bad experiment report json: ") + e.what());
    }
    return rep;
}

}  // namespace ccl
