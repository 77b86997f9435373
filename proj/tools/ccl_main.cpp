// Command line front end: synthetic data generation, difficulty scoring,
// schedule training, the full experiment grid, the hard-ratio sweep, and
// report rendering. Exit codes: 0 ok, 1 validation or I/O problem, 2
// numeric failure.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ccl/ccl.hpp"

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Config files are plain `key = value` lines. `#` starts a comment,
// blank lines are skipped, duplicate keys are rejected.
std::map<std::string, std::string> parse_kv_stream(std::istream& in, const std::string& origin) {
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ccl::ParseError(origin + ": expected 'key = value'", line_no);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ccl::ParseError(origin + ": empty key", line_no);
        if (!kv.emplace(key, value).second)
            throw ccl::ParseError(origin + ": duplicate key '" + key + "'", line_no);
    }
    return kv;
}

std::map<std::string, std::string> load_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ccl::IoError("cannot open config file " + path);
    return parse_kv_stream(in, path);
}

void apply_set_overrides(std::map<std::string, std::string>& kv,
                         const std::vector<std::string>& sets) {
    for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw ccl::ValidationError("--set expects key=value, got '" + s + "'");
        kv[trim(s.substr(0, eq))] = trim(s.substr(eq + 1));
    }
}

double kv_double(const std::string& key, const std::string& raw) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(raw, &pos);
        if (pos != raw.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ccl::ValidationError("config key '" + key + "': expected a number, got '" + raw +
                                   "'");
    }
}

long long kv_ll(const std::string& key, const std::string& raw) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(raw, &pos);
        if (pos != raw.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ccl::ValidationError("config key '" + key + "': expected an integer, got '" + raw +
                                   "'");
    }
}

std::uint64_t kv_u64(const std::string& key, const std::string& raw) {
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(raw, &pos);
        if (pos != raw.size() || raw.find('-') != std::string::npos)
            throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ccl::ValidationError("config key '" + key +
                                   "': expected a non-negative integer, got '" + raw + "'");
    }
}

bool kv_bool(const std::string& key, const std::string& raw) {
    std::string v = raw;
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ccl::ValidationError("config key '" + key + "': expected true/false, got '" + raw + "'");
}

std::vector<std::string> split_list(const std::string& raw) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(raw);
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// Tracks which keys a config consumed so typos surface as errors.
class KvReader {
public:
    explicit KvReader(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}

    template <typename F>
    void if_set(const std::string& key, F&& f) {
        auto it = kv_.find(key);
        if (it == kv_.end()) return;
        used_.insert(key);
        f(it->second);
    }

    bool has(const std::string& key) const { return kv_.count(key) != 0; }

    void finish() const {
        std::string unknown;
        for (const auto& [k, v] : kv_) {
            if (used_.count(k)) continue;
            if (!unknown.empty()) unknown += ", ";
            unknown += "'" + k + "'";
        }
        if (!unknown.empty()) throw ccl::ValidationError("unknown config key(s): " + unknown);
    }

private:
    std::map<std::string, std::string> kv_;
    std::set<std::string> used_;
};

ccl::ArmSpec named_arm(const std::string& name) {
    for (const auto& a : ccl::default_arms())
        if (a.name == name) return a;
    ccl::ArmSpec a;
    a.name = name;
    if (name == "two_stage_agreement") {
        a.kind = ccl::ScheduleKind::two_stage;
        a.proxy = ccl::DifficultySource::agreement;
    } else if (name == "two_stage_self_taught") {
        a.kind = ccl::ScheduleKind::two_stage;
        a.proxy = ccl::DifficultySource::self_taught;
    } else if (name == "two_stage_transfer") {
        a.kind = ccl::ScheduleKind::two_stage;
        a.proxy = ccl::DifficultySource::transfer;
    }
    return a;
}

void apply_arm_overrides(KvReader& r, ccl::ArmSpec& a) {
    const std::string p = "arm." + a.name + ".";
    r.if_set(p + "kind", [&](const std::string& v) { a.kind = ccl::parse_schedule_kind(v); });
    r.if_set(p + "bins", [&](const std::string& v) {
        a.bins.clear();
        for (const auto& tok : split_list(v)) a.bins.insert(ccl::parse_difficulty_level(tok));
        if (a.bins.empty())
            throw ccl::ValidationError("config key '" + p + "bins': empty bin list");
    });
    r.if_set(p + "hard_ratio",
             [&](const std::string& v) { a.hard_ratio = kv_double(p + "hard_ratio", v); });
    r.if_set(p + "proxy", [&](const std::string& v) { a.proxy = ccl::parse_difficulty_source(v); });
    r.if_set(p + "epochs_per_stage", [&](const std::string& v) {
        a.epochs_per_stage = static_cast<int>(kv_ll(p + "epochs_per_stage", v));
    });
}

struct CliConfig {
    ccl::ExperimentConfig exp;
    std::optional<double> calibrate_target;
    double calibrate_tolerance = 0.02;
    bool groups_explicit = false;   // generate scales the default down for small -n
};

CliConfig config_from_kv(std::map<std::string, std::string> kv) {
    CliConfig out;
    ccl::ExperimentConfig& c = out.exp;
    KvReader r(std::move(kv));

    r.if_set("dataset", [&](const std::string& v) { c.dataset_path = v; });
    r.if_set("pretrain_dataset", [&](const std::string& v) { c.pretrain_path = v; });
    r.if_set("test_fraction",
             [&](const std::string& v) { c.test_fraction = kv_double("test_fraction", v); });
    r.if_set("resplit_per_seed",
             [&](const std::string& v) { c.resplit_per_seed = kv_bool("resplit_per_seed", v); });
    r.if_set("tie_policy", [&](const std::string& v) {
        if (v == "error")
            c.tie_policy = ccl::TiePolicy::error;
        else if (v == "class0")
            c.tie_policy = ccl::TiePolicy::class0;
        else
            throw ccl::ValidationError("config key 'tie_policy': expected error or class0, got '" +
                                       v + "'");
    });
    r.if_set("baseline", [&](const std::string& v) { c.baseline_arm = v; });
    r.if_set("master_seed",
             [&](const std::string& v) { c.master_seed = kv_u64("master_seed", v); });
    r.if_set("top_k", [&](const std::string& v) {
        c.top_k = static_cast<std::size_t>(kv_u64("top_k", v));
    });
    r.if_set("kappa.arm", [&](const std::string& v) { c.kappa_arm = v; });
    r.if_set("kappa.stage", [&](const std::string& v) {
        c.kappa_stage = static_cast<int>(kv_ll("kappa.stage", v));
    });
    r.if_set("kappa.thresholds", [&](const std::string& v) {
        c.kappa_thresholds.clear();
        for (const auto& tok : split_list(v))
            c.kappa_thresholds.push_back(kv_double("kappa.thresholds", tok));
    });

    if (r.has("seeds") && r.has("num_seeds"))
        throw ccl::ValidationError("config: set either seeds or num_seeds, not both");
    r.if_set("seeds", [&](const std::string& v) {
        c.seeds.clear();
        for (const auto& tok : split_list(v)) c.seeds.push_back(kv_u64("seeds", tok));
    });
    r.if_set("num_seeds", [&](const std::string& v) {
        const auto n = kv_u64("num_seeds", v);
        c.seeds.clear();
        for (std::uint64_t s = 1; s <= n; ++s) c.seeds.push_back(s);
    });

    ccl::GenConfig& g = c.gen;
    r.if_set("gen.num_examples", [&](const std::string& v) {
        g.num_examples = static_cast<std::size_t>(kv_u64("gen.num_examples", v));
    });
    r.if_set("gen.num_groups", [&](const std::string& v) {
        g.num_groups = static_cast<std::size_t>(kv_u64("gen.num_groups", v));
        out.groups_explicit = true;
    });
    r.if_set("gen.feature_dim", [&](const std::string& v) {
        g.feature_dim = static_cast<std::size_t>(kv_u64("gen.feature_dim", v));
    });
    r.if_set("gen.num_annotators", [&](const std::string& v) {
        g.num_annotators = static_cast<std::size_t>(kv_u64("gen.num_annotators", v));
    });
    r.if_set("gen.class_prior",
             [&](const std::string& v) { g.class_prior = kv_double("gen.class_prior", v); });
    r.if_set("gen.difficulty_alpha", [&](const std::string& v) {
        g.difficulty_alpha = kv_double("gen.difficulty_alpha", v);
    });
    r.if_set("gen.difficulty_beta", [&](const std::string& v) {
        g.difficulty_beta = kv_double("gen.difficulty_beta", v);
    });
    r.if_set("gen.class_mean_separation", [&](const std::string& v) {
        g.class_mean_separation = kv_double("gen.class_mean_separation", v);
    });
    r.if_set("gen.feature_noise_std", [&](const std::string& v) {
        g.feature_noise_std = kv_double("gen.feature_noise_std", v);
    });
    r.if_set("gen.annotator_p_min", [&](const std::string& v) {
        g.annotator_p_min = kv_double("gen.annotator_p_min", v);
    });
    r.if_set("gen.annotator_p_max", [&](const std::string& v) {
        g.annotator_p_max = kv_double("gen.annotator_p_max", v);
    });
    r.if_set("gen.per_annotator_bias", [&](const std::string& v) {
        g.per_annotator_bias.clear();
        for (const auto& tok : split_list(v))
            g.per_annotator_bias.push_back(kv_double("gen.per_annotator_bias", tok));
    });
    r.if_set("gen.direct_score_noise", [&](const std::string& v) {
        g.direct_score_noise = kv_double("gen.direct_score_noise", v);
    });
    r.if_set("gen.seed", [&](const std::string& v) { g.seed = kv_u64("gen.seed", v); });
    r.if_set("gen.calibrate_easy_fraction", [&](const std::string& v) {
        out.calibrate_target = kv_double("gen.calibrate_easy_fraction", v);
    });
    r.if_set("gen.calibrate_tolerance", [&](const std::string& v) {
        out.calibrate_tolerance = kv_double("gen.calibrate_tolerance", v);
    });

    ccl::LearnerConfig& l = c.learner;
    r.if_set("learner.hidden", [&](const std::string& v) {
        l.hidden_sizes.clear();
        for (const auto& tok : split_list(v))
            l.hidden_sizes.push_back(static_cast<int>(kv_ll("learner.hidden", tok)));
    });
    r.if_set("learner.epochs", [&](const std::string& v) {
        l.epochs = static_cast<int>(kv_ll("learner.epochs", v));
    });
    r.if_set("learner.initial_lr",
             [&](const std::string& v) { l.initial_lr = kv_double("learner.initial_lr", v); });
    r.if_set("learner.lr_decay",
             [&](const std::string& v) { l.lr_decay = kv_double("learner.lr_decay", v); });
    r.if_set("learner.batch_size", [&](const std::string& v) {
        l.batch_size = static_cast<int>(kv_ll("learner.batch_size", v));
    });
    r.if_set("learner.adam_beta1",
             [&](const std::string& v) { l.adam_beta1 = kv_double("learner.adam_beta1", v); });
    r.if_set("learner.adam_beta2",
             [&](const std::string& v) { l.adam_beta2 = kv_double("learner.adam_beta2", v); });
    r.if_set("learner.adam_eps",
             [&](const std::string& v) { l.adam_eps = kv_double("learner.adam_eps", v); });
    r.if_set("learner.augment_sigma", [&](const std::string& v) {
        l.augment_sigma = kv_double("learner.augment_sigma", v);
    });
    r.if_set("learner.weight_init_scale", [&](const std::string& v) {
        l.weight_init_scale = kv_double("learner.weight_init_scale", v);
    });
    r.if_set("learner.reinit_per_stage", [&](const std::string& v) {
        l.reinit_per_stage = kv_bool("learner.reinit_per_stage", v);
    });

    r.if_set("arms", [&](const std::string& v) {
        c.arms.clear();
        for (const auto& name : split_list(v)) c.arms.push_back(named_arm(name));
    });
    for (auto& a : c.arms) apply_arm_overrides(r, a);

    r.finish();
    return out;
}

void apply_calibration(CliConfig& cc) {
    if (!cc.calibrate_target) return;
    const auto res = ccl::calibrate(*cc.calibrate_target, cc.exp.gen, cc.calibrate_tolerance);
    std::printf("calibrated annotator_p_max to %.4f (easy fraction %.3f, target %.3f)\n",
                res.config.annotator_p_max, res.achieved_easy_fraction, *cc.calibrate_target);
    cc.exp.gen = res.config;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ccl::IoError("cannot create directory " + dir + ": " + ec.message());
}

void print_assignment_counts(const ccl::DifficultyAssignment& a) {
    std::map<ccl::DifficultyLevel, std::size_t> counts;
    for (const auto& [id, lvl] : a.bins) ++counts[lvl];
    std::printf("bins (%s, from %s):", a.granularity == ccl::Granularity::fine ? "fine" : "coarse",
                ccl::to_string(a.source));
    for (auto lvl : {ccl::DifficultyLevel::very_easy, ccl::DifficultyLevel::easy,
                     ccl::DifficultyLevel::hard, ccl::DifficultyLevel::very_hard}) {
        auto it = counts.find(lvl);
        if (it != counts.end())
            std::printf(" %s=%zu", ccl::to_string(lvl), it->second);
    }
    std::printf("\n");
}

void print_dataset_summary(const ccl::Dataset& ds, ccl::TiePolicy tie) {
    std::printf("%zu examples, %zu features, %zu annotators\n", ds.size(), ds.feature_dim,
                ds.num_annotators);
    std::printf("agreement histogram:");
    for (const auto& [count, n] : ccl::agreement_histogram(ds, tie))
        std::printf(" %d/%zu:%zu", count, ds.num_annotators, n);
    std::printf("\n");
    std::printf("coarse easy fraction: %.3f\n", ccl::easy_fraction(ds));
}

struct CommonFlags {
    std::string config_path;
    std::vector<std::string> sets;
    std::string out_dir = ".";
    std::string format = "json";
};

CliConfig load_cli_config(const CommonFlags& f) {
    std::map<std::string, std::string> kv;
    if (!f.config_path.empty()) kv = load_kv_file(f.config_path);
    apply_set_overrides(kv, f.sets);
    return config_from_kv(std::move(kv));
}

int cmd_generate(const CommonFlags& f, const std::optional<std::uint64_t>& seed,
                 const std::optional<std::uint64_t>& num_examples,
                 const std::optional<double>& calibrate, std::string out_path) {
    CliConfig cc = load_cli_config(f);
    if (seed) cc.exp.gen.seed = *seed;
    if (num_examples) cc.exp.gen.num_examples = static_cast<std::size_t>(*num_examples);
    if (!cc.groups_explicit)
        cc.exp.gen.num_groups = std::min(cc.exp.gen.num_groups, cc.exp.gen.num_examples);
    if (calibrate) cc.calibrate_target = *calibrate;
    apply_calibration(cc);

    if (out_path.empty()) {
        ensure_dir(f.out_dir);
        out_path = f.out_dir + "/dataset." + (f.format == "csv" ? "csv" : "jsonl");
    }
    const ccl::Dataset ds = ccl::generate(cc.exp.gen);
    ccl::save_dataset(ds, out_path);
    std::printf("wrote %s\n", out_path.c_str());
    print_dataset_summary(ds, cc.exp.tie_policy);
    return 0;
}

int cmd_score(const CommonFlags& f, const std::string& data_path, const std::string& method,
              const std::string& granularity, const std::optional<double>& target,
              const std::string& pretrain_path, std::uint64_t seed, std::string out_path) {
    CliConfig cc = load_cli_config(f);
    const ccl::Dataset ds = ccl::load_dataset(data_path);

    ccl::DifficultyAssignment asg;
    if (method == "agreement") {
        const auto gran =
            granularity == "coarse" ? ccl::Granularity::coarse : ccl::Granularity::fine;
        asg = ccl::bin_by_agreement(ds, gran);
    } else if (method == "direct") {
        asg = ccl::bin_by_direct_annotation(ds);
    } else if (method == "self_taught" || method == "transfer") {
        ccl::ConfidenceScore scores;
        if (method == "self_taught") {
            scores = ccl::score_self_taught(ds, cc.exp.learner, ccl::derive_seed(seed, "score"),
                                            cc.exp.tie_policy);
        } else {
            if (pretrain_path.empty())
                throw ccl::ValidationError("method transfer needs --pretrain");
            const ccl::Dataset pre = ccl::load_dataset(pretrain_path);
            scores = ccl::score_transfer(ds, pre, cc.exp.learner, ccl::derive_seed(seed, "score"),
                                         cc.exp.tie_policy);
        }
        const double tgt = target ? *target : ccl::easy_fraction(ds);
        const auto src = method == "transfer" ? ccl::DifficultySource::transfer
                                              : ccl::DifficultySource::self_taught;
        const auto tau = ccl::threshold_tau(scores, tgt, src);
        std::printf("tau=%.6f target_easy=%.3f realized_easy=%.3f%s\n", tau.tau, tgt,
                    tau.realized_easy_fraction, tau.degenerate ? " (degenerate: all tied)" : "");
        asg = tau.assignment;
    } else {
        throw ccl::ValidationError("unknown method '" + method +
                                   "' (expected agreement, direct, self_taught or transfer)");
    }

    if (out_path.empty()) {
        ensure_dir(f.out_dir);
        out_path = f.out_dir + "/assignment.jsonl";
    }
    ccl::save_assignment_jsonl(asg, out_path);
    std::printf("wrote %s\n", out_path.c_str());
    print_assignment_counts(asg);
    return 0;
}

int cmd_train(const CommonFlags& f, const std::string& data_path, const std::string& kind,
              const std::string& bins, const std::optional<double>& ratio,
              const std::string& proxy, int epochs_per_stage, const std::string& pretrain_path,
              const std::optional<double>& test_fraction, std::uint64_t seed) {
    CliConfig cc = load_cli_config(f);
    const ccl::Dataset ds = ccl::load_dataset(data_path);
    const double tf = test_fraction ? *test_fraction : cc.exp.test_fraction;

    auto [train, test] = ccl::split_by_group(ds, tf, seed);
    const auto gold_train = ccl::gold_labels(train, cc.exp.tie_policy);
    const auto gold_test = ccl::gold_labels(test, cc.exp.tie_policy);
    const auto test_fine = ccl::bin_by_agreement(test, ccl::Granularity::fine);
    const auto evaluator = ccl::make_test_evaluator(test, gold_test, test_fine);

    ccl::ArmSpec spec = named_arm(kind);
    spec.kind = ccl::parse_schedule_kind(kind);
    if (!bins.empty()) {
        spec.bins.clear();
        for (const auto& tok : split_list(bins)) spec.bins.insert(ccl::parse_difficulty_level(tok));
    }
    if (ratio) spec.hard_ratio = *ratio;
    if (!proxy.empty()) spec.proxy = ccl::parse_difficulty_source(proxy);
    spec.epochs_per_stage = epochs_per_stage;

    std::optional<ccl::Dataset> pretrain;
    if (!pretrain_path.empty()) pretrain = ccl::load_dataset(pretrain_path);

    const auto sched = ccl::build_arm_schedule(spec, train, cc.exp.learner,
                                               ccl::derive_seed(seed, spec.name), pretrain,
                                               cc.exp.tie_policy);

    ccl::LearnerConfig lc = cc.exp.learner;
    lc.seed = ccl::derive_seed(seed, spec.name);
    lc.init_seed = ccl::derive_seed(seed, "init");

    auto [model, log] = ccl::train_schedule(train, gold_train, sched, lc, evaluator);

    ensure_dir(f.out_dir);
    ccl::save_model_json(model, f.out_dir + "/model.json");
    ccl::save_schedule_json(sched, f.out_dir + "/schedule.json");
    ccl::write_text_file(f.out_dir + "/training_log.csv", ccl::training_log_to_csv(log));
    ccl::write_text_file(f.out_dir + "/training_log.json",
                         ccl::training_log_to_json(log).dump(2) + "\n");

    std::printf("train=%zu test=%zu schedule=%s stages=%zu\n", train.size(), test.size(),
                ccl::to_string(sched.kind), sched.stages.size());
    for (std::size_t i = 0; i < sched.stages.size(); ++i) {
        const auto& st = sched.stages[i];
        const auto& sum = log.stages[i];
        std::printf("stage %d: %zu examples, %d epochs, top-5 test AUC %.4f\n", st.index,
                    st.example_ids.size(), st.epochs, sum.top5_auc);
    }
    if (!log.epochs.empty())
        std::printf("final test AUC %.4f\n", log.epochs.back().auc_overall);
    std::printf("wrote %s/{model,schedule,training_log}.json and training_log.csv\n",
                f.out_dir.c_str());
    return 0;
}

ccl::ReportFormat parse_format(const std::string& s) { return ccl::parse_report_format(s); }

int cmd_experiment(const CommonFlags& f, const std::optional<std::uint64_t>& master_seed) {
    CliConfig cc = load_cli_config(f);
    if (master_seed) cc.exp.master_seed = *master_seed;
    apply_calibration(cc);
    ensure_dir(f.out_dir);

    const std::string partial_path = f.out_dir + "/report_partial.json";
    auto sink = [&](const ccl::ExperimentReport& partial) {
        ccl::write_text_file(partial_path,
                             ccl::experiment_report_to_json(partial).dump(2) + "\n");
        std::fprintf(stderr, "partial results saved to %s\n", partial_path.c_str());
    };

    const ccl::ExperimentReport rep = ccl::run(cc.exp, sink);
    const auto j = ccl::experiment_report_to_json(rep);

    std::vector<std::string> written =
        ccl::emit_report(j, ccl::ReportFormat::json, f.out_dir, "report");
    if (f.format != "json") {
        auto more = ccl::emit_report(j, parse_format(f.format), f.out_dir, "report");
        written.insert(written.end(), more.begin(), more.end());
    }

    std::printf("seeds=%zu baseline=%s\n", rep.seeds.size(), rep.baseline_arm.c_str());
    for (const auto& arm : rep.arms) {
        const auto& last = arm.stages.back();
        std::printf("%-28s final AUC %.4f +/- %.4f", arm.spec.name.c_str(), last.auc.mean,
                    last.auc.std_dev);
        if (last.has_ttest)
            std::printf("  p=%.3g%s", last.vs_baseline.p,
                        ccl::significance_stars(last.vs_baseline.p).c_str());
        std::printf("\n");
    }
    std::printf("determinism hash: %s\n", j.at("determinism_hash").get<std::string>().c_str());
    for (const auto& p : written) std::printf("wrote %s\n", p.c_str());
    return 0;
}

int cmd_sweep(const CommonFlags& f, const std::optional<std::uint64_t>& master_seed,
              const std::string& ratios_raw) {
    CliConfig cc = load_cli_config(f);
    if (master_seed) cc.exp.master_seed = *master_seed;
    apply_calibration(cc);
    ensure_dir(f.out_dir);

    std::vector<double> ratios;
    for (const auto& tok : split_list(ratios_raw)) ratios.push_back(kv_double("--ratios", tok));

    const ccl::RatioSweepReport rep = ccl::run_ratio_sweep(cc.exp, ratios);
    const auto j = ccl::sweep_report_to_json(rep);

    std::vector<std::string> written =
        ccl::emit_report(j, ccl::ReportFormat::json, f.out_dir, "sweep");
    if (f.format != "json") {
        auto more = ccl::emit_report(j, parse_format(f.format), f.out_dir, "sweep");
        written.insert(written.end(), more.begin(), more.end());
    }

    std::printf("baseline AUC %.4f +/- %.4f (%zu seeds)\n", rep.baseline.mean,
                rep.baseline.std_dev, rep.baseline.n);
    for (std::size_t pi = 0; pi < rep.proxies.size(); ++pi) {
        for (std::size_t ri = 0; ri < rep.ratios.size(); ++ri) {
            const auto& s = rep.summary[pi][ri];
            std::printf("%-12s ratio %.2f: AUC %.4f +/- %.4f\n", rep.proxies[pi].c_str(),
                        rep.ratios[ri], s.mean, s.std_dev);
        }
    }
    for (const auto& p : written) std::printf("wrote %s\n", p.c_str());
    return 0;
}

int cmd_report(const CommonFlags& f, const std::string& in_path) {
    const auto j = ccl::load_report_json(in_path);
    const std::string stem = std::filesystem::path(in_path).stem().string();
    const auto written = ccl::emit_report(j, parse_format(f.format), f.out_dir, stem);
    for (const auto& p : written) std::printf("wrote %s\n", p.c_str());
    return 0;
}

void add_common(CLI::App* sub, CommonFlags& f, bool with_format = true) {
    sub->add_option("--config", f.config_path, "key = value config file");
    sub->add_option("--set", f.sets, "override a config key, e.g. --set learner.epochs=10")
        ->type_name("KEY=VALUE");
    sub->add_option("--out-dir", f.out_dir, "output directory")->capture_default_str();
    if (with_format)
        sub->add_option("--format", f.format, "report format: json, csv or markdown")
            ->check(CLI::IsMember({"json", "csv", "markdown", "md"}))
            ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Difficulty-ordered training curricula from annotator agreement: "
        "synthetic data, schedules, training and evaluation reports"};
    app.require_subcommand(1);

    // generate
    CommonFlags gen_f;
    std::optional<std::uint64_t> gen_seed;
    std::optional<std::uint64_t> gen_n;
    std::optional<double> gen_cal;
    std::string gen_out;
    auto* gen = app.add_subcommand("generate", "generate a synthetic annotated dataset");
    add_common(gen, gen_f);
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("-n,--num-examples", gen_n, "number of examples");
    gen->add_option("--calibrate", gen_cal,
                    "fit annotator noise so the coarse easy fraction hits this target");
    gen->add_option("--out", gen_out, "dataset path (.jsonl or .csv); default under --out-dir");

    // score
    CommonFlags score_f;
    std::string score_data, score_method = "agreement", score_gran = "fine";
    std::string score_pretrain, score_out;
    std::optional<double> score_target;
    std::uint64_t score_seed = 1;
    auto* score = app.add_subcommand("score", "assign difficulty bins to a dataset");
    add_common(score, score_f, false);
    score->add_option("--data", score_data, "dataset to score")->required();
    score->add_option("--method", score_method,
                      "agreement, direct, self_taught or transfer")
        ->check(CLI::IsMember({"agreement", "direct", "self_taught", "transfer"}))
        ->capture_default_str();
    score->add_option("--granularity", score_gran, "fine or coarse (agreement only)")
        ->check(CLI::IsMember({"fine", "coarse"}))
        ->capture_default_str();
    score->add_option("--target-easy-fraction", score_target,
                      "easy fraction for proxy thresholds; default matches the data");
    score->add_option("--pretrain", score_pretrain, "pretraining dataset for transfer");
    score->add_option("--seed", score_seed, "seed for trained proxies")->capture_default_str();
    score->add_option("--out", score_out, "assignment path (.jsonl); default under --out-dir");

    // train
    CommonFlags train_f;
    std::string train_data, train_kind = "curriculum", train_bins, train_proxy;
    std::string train_pretrain;
    std::optional<double> train_ratio, train_tf;
    int train_eps = 0;
    std::uint64_t train_seed = 1;
    auto* train = app.add_subcommand("train", "train one schedule and log per-epoch metrics");
    add_common(train, train_f, false);
    train->add_option("--data", train_data, "annotated dataset")->required();
    train->add_option("--kind", train_kind,
                      "curriculum, anti, direct, random_control, single_stage or two_stage")
        ->check(CLI::IsMember({"curriculum", "anti", "direct", "random_control", "single_stage",
                               "two_stage"}))
        ->capture_default_str();
    train->add_option("--bins", train_bins, "bins for single_stage, e.g. very_easy,easy");
    train->add_option("--ratio", train_ratio, "hard ratio for two_stage");
    train->add_option("--proxy", train_proxy,
                      "two_stage difficulty source: agreement, self_taught or transfer");
    train->add_option("--epochs-per-stage", train_eps, "override epochs per stage");
    train->add_option("--pretrain", train_pretrain, "pretraining dataset for transfer");
    train->add_option("--test-fraction", train_tf, "held-out fraction, grouped");
    train->add_option("--seed", train_seed, "split and training seed")->capture_default_str();

    // experiment
    CommonFlags exp_f;
    std::optional<std::uint64_t> exp_seed;
    auto* exp = app.add_subcommand("experiment", "run the multi-arm, multi-seed grid");
    add_common(exp, exp_f);
    exp->add_option("--seed", exp_seed, "master seed perturbing all derived seeds");

    // sweep
    CommonFlags sweep_f;
    std::optional<std::uint64_t> sweep_seed;
    std::string sweep_ratios = "0.25,0.33,0.5,0.75,1.0";
    auto* sweep = app.add_subcommand("sweep", "two-stage hard-ratio sweep across proxies");
    add_common(sweep, sweep_f);
    sweep->add_option("--seed", sweep_seed, "master seed perturbing all derived seeds");
    sweep->add_option("--ratios", sweep_ratios, "comma list of hard ratios in (0,1]")
        ->capture_default_str();

    // report
    CommonFlags rep_f;
    rep_f.format = "markdown";
    std::string rep_in;
    auto* rep = app.add_subcommand("report", "re-render a stored report json");
    add_common(rep, rep_f);
    rep->add_option("--in", rep_in, "report json produced by experiment or sweep")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) return cmd_generate(gen_f, gen_seed, gen_n, gen_cal, gen_out);
        if (score->parsed())
            return cmd_score(score_f, score_data, score_method, score_gran, score_target,
                             score_pretrain, score_seed, score_out);
        if (train->parsed())
            return cmd_train(train_f, train_data, train_kind, train_bins, train_ratio,
                             train_proxy, train_eps, train_pretrain, train_tf, train_seed);
        if (exp->parsed()) return cmd_experiment(exp_f, exp_seed);
        if (sweep->parsed()) return cmd_sweep(sweep_f, sweep_seed, sweep_ratios);
        if (rep->parsed()) return cmd_report(rep_f, rep_in);
    } catch (const ccl::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 2;
    } catch (const ccl::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
