#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "ccl/dataset.hpp"
#include "ccl/difficulty.hpp"
#include "ccl/errors.hpp"
#include "ccl/metrics.hpp"
#include "ccl/rng.hpp"
#include "ccl/schedule.hpp"

namespace ccl {

struct LearnerConfig {
    std::vector<int> hidden_sizes;    // empty = plain logistic regression
    int epochs = 50;                  // default stage length
    double initial_lr = 1e-3;
    double lr_decay = 0.91;           // multiplicative, per epoch
    int batch_size = 32;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double augment_sigma = 0.1;       // per-epoch Gaussian feature jitter
    double weight_init_scale = 1.0;   // scales the 1/sqrt(fan_in) init
    std::uint64_t seed = 0;
    std::optional<std::uint64_t> init_seed;   // share one init across runs
    bool reinit_per_stage = false;    // fresh weights at each stage boundary
};

inline void validate_config(const LearnerConfig& cfg) {
    if (!(cfg.initial_lr > 0.0)) throw ValidationError("initial_lr must be positive");
    if (!(cfg.lr_decay > 0.0 && cfg.lr_decay <= 1.0))
        throw ValidationError("lr_decay must be in (0, 1]");
    if (cfg.epochs < 1) throw ValidationError("epochs must be >= 1");
    if (cfg.batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (cfg.augment_sigma < 0.0) throw ValidationError("augment_sigma must be >= 0");
    for (int h : cfg.hidden_sizes)
        if (h < 1) throw ValidationError("hidden layer sizes must be >= 1");
}

/// Dense feed-forward net with rectifier hidden layers and a 2-way softmax
/// head. weights[l] is row-major out x in.
struct Model {
    std::vector<std::size_t> layer_sizes;           // [F, hidden..., 2]
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    std::size_t feature_dim() const { return layer_sizes.front(); }
    std::size_t num_layers() const { return weights.size(); }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (std::size_t l = 0; l < weights.size(); ++l)
            n += weights[l].size() + biases[l].size();
        return n;
    }
};

/// Per-parameter gradients, same shapes as the model.
struct Gradients {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;
};

inline Model init_model(const LearnerConfig& cfg, std::size_t feature_dim) {
    validate_config(cfg);
    if (feature_dim < 1) throw ValidationError("feature_dim must be >= 1");

    Model m;
    m.layer_sizes.push_back(feature_dim);
    for (int h : cfg.hidden_sizes) m.layer_sizes.push_back(static_cast<std::size_t>(h));
    m.layer_sizes.push_back(2);

    RandomSource rng(derive_seed(cfg.init_seed.value_or(cfg.seed), "init"));
    for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
        const std::size_t in = m.layer_sizes[l], out = m.layer_sizes[l + 1];
        const double sd = cfg.weight_init_scale / std::sqrt(static_cast<double>(in));
        std::vector<double> w(out * in);
        for (auto& v : w) v = rng.normal(0.0, sd);
        m.weights.push_back(std::move(w));
        m.biases.emplace_back(out, 0.0);
    }
    return m;
}

namespace detail {

/// Activations of every layer for one input; activations[0] is the input
/// itself, the last entry holds the softmax probabilities.
struct ForwardPass {
    std::vector<std::vector<double>> activations;
    std::vector<std::vector<double>> pre_activations;   // z per affine layer
    double log_z = 0.0;                                 // log sum exp of logits
};

inline ForwardPass forward_pass(const Model& m, const std::vector<double>& features) {
    if (features.size() != m.feature_dim())
        throw SchemaError("feature length " + std::to_string(features.size()) +
                          " does not match model input " + std::to_string(m.feature_dim()));
    for (double f : features)
        if (!std::isfinite(f)) throw NumericError("non-finite feature input");

    ForwardPass fp;
    fp.activations.push_back(features);
    const std::size_t L = m.num_layers();
    for (std::size_t l = 0; l < L; ++l) {
        const std::size_t in = m.layer_sizes[l], out = m.layer_sizes[l + 1];
        const auto& a = fp.activations.back();
        std::vector<double> z(out);
        for (std::size_t o = 0; o < out; ++o) {
            double s = m.biases[l][o];
            const double* w = m.weights[l].data() + o * in;
            for (std::size_t i = 0; i < in; ++i) s += w[i] * a[i];
            z[o] = s;
        }
        fp.pre_activations.push_back(z);
        if (l + 1 < L) {
            for (auto& v : z) v = v > 0.0 ? v : 0.0;
            fp.activations.push_back(std::move(z));
        } else {
            const double mx = std::max(z[0], z[1]);
            const double e0 = std::exp(z[0] - mx), e1 = std::exp(z[1] - mx);
            fp.log_z = mx + std::log(e0 + e1);
            fp.activations.push_back({e0 / (e0 + e1), e1 / (e0 + e1)});
        }
    }
    return fp;
}

}  // namespace detail

/// Class probabilities (p0, p1) for one feature vector.
inline std::pair<double, double> forward(const Model& m, const std::vector<double>& features) {
    const auto fp = detail::forward_pass(m, features);
    const auto& p = fp.activations.back();
    return {p[0], p[1]};
}

inline Gradients zero_gradients(const Model& m) {
    Gradients g;
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        g.weights.emplace_back(m.weights[l].size(), 0.0);
        g.biases.emplace_back(m.biases[l].size(), 0.0);
    }
    return g;
}

/// Mean cross-entropy over the batch, with gradients accumulated into `out`
/// (which must be zeroed by the caller). Returns the mean loss.
inline double batch_loss_and_gradients(const Model& m,
                                       const std::vector<std::vector<double>>& features,
                                       const std::vector<int>& labels, Gradients& out) {
    if (features.size() != labels.size() || features.empty())
        throw ValidationError("batch features and labels must align and be non-empty");
    const std::size_t L = m.num_layers();
    if (out.weights.size() != L || out.biases.size() != L)
        throw ValidationError("gradient buffers do not match the model (use zero_gradients)");
    for (std::size_t l = 0; l < L; ++l)
        if (out.weights[l].size() != m.weights[l].size() ||
            out.biases[l].size() != m.biases[l].size())
            throw ValidationError("gradient buffers do not match the model (use zero_gradients)");
    const double inv_b = 1.0 / static_cast<double>(features.size());

    double loss = 0.0;
    for (std::size_t s = 0; s < features.size(); ++s) {
        const int y = labels[s];
        if (y != 0 && y != 1) throw ValidationError("labels must be 0 or 1");
        const auto fp = detail::forward_pass(m, features[s]);
        loss += (fp.log_z - fp.pre_activations.back()[static_cast<std::size_t>(y)]) * inv_b;

        // dz for the head: softmax minus one-hot.
        std::vector<double> dz = fp.activations.back();
        dz[static_cast<std::size_t>(y)] -= 1.0;
        for (std::size_t l = L; l-- > 0;) {
            const std::size_t in = m.layer_sizes[l], out_n = m.layer_sizes[l + 1];
            const auto& a = fp.activations[l];
            for (std::size_t o = 0; o < out_n; ++o) {
                const double d = dz[o] * inv_b;
                double* gw = out.weights[l].data() + o * in;
                for (std::size_t i = 0; i < in; ++i) gw[i] += d * a[i];
                out.biases[l][o] += d;
            }
            if (l == 0) break;
            std::vector<double> da(in, 0.0);
            for (std::size_t o = 0; o < out_n; ++o) {
                const double* w = m.weights[l].data() + o * in;
                for (std::size_t i = 0; i < in; ++i) da[i] += w[i] * dz[o];
            }
            for (std::size_t i = 0; i < in; ++i)
                da[i] = fp.pre_activations[l - 1][i] > 0.0 ? da[i] : 0.0;
            dz = std::move(da);
        }
    }
    if (!std::isfinite(loss)) throw NumericError("non-finite batch loss");
    return loss;
}

/// Mean cross-entropy of the batch without touching gradients.
inline double batch_loss(const Model& m, const std::vector<std::vector<double>>& features,
                         const std::vector<int>& labels) {
    if (features.size() != labels.size() || features.empty())
        throw ValidationError("batch features and labels must align and be non-empty");
    double loss = 0.0;
    for (std::size_t s = 0; s < features.size(); ++s) {
        const auto fp = detail::forward_pass(m, features[s]);
        loss += fp.log_z - fp.pre_activations.back()[static_cast<std::size_t>(labels[s])];
    }
    return loss / static_cast<double>(features.size());
}

struct AdamState {
    std::vector<std::vector<double>> m_w, v_w, m_b, v_b;
    std::uint64_t step = 0;
};

inline AdamState init_adam(const Model& model) {
    AdamState st;
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        st.m_w.emplace_back(model.weights[l].size(), 0.0);
        st.v_w.emplace_back(model.weights[l].size(), 0.0);
        st.m_b.emplace_back(model.biases[l].size(), 0.0);
        st.v_b.emplace_back(model.biases[l].size(), 0.0);
    }
    return st;
}

namespace detail {

inline void adam_update_block(std::vector<double>& params, const std::vector<double>& grads,
                              std::vector<double>& m, std::vector<double>& v,
                              const LearnerConfig& cfg, double lr, double bc1, double bc2,
                              const char* block, std::size_t layer) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        if (!std::isfinite(g))
            throw NumericError("non-finite gradient in layer " + std::to_string(layer) + " " +
                               block);
        m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g;
        v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g * g;
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
    }
}

}  // namespace detail

/// One bias-corrected Adam update over all parameter blocks.
inline void adam_step(Model& model, const Gradients& grads, AdamState& st,
                      const LearnerConfig& cfg, double lr) {
    ++st.step;
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(st.step));
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        detail::adam_update_block(model.weights[l], grads.weights[l], st.m_w[l], st.v_w[l], cfg,
                                  lr, bc1, bc2, "weights", l);
        detail::adam_update_block(model.biases[l], grads.biases[l], st.m_b[l], st.v_b[l], cfg,
                                  lr, bc1, bc2, "biases", l);
    }
}

inline double lr_at_epoch(const LearnerConfig& cfg, int epoch) {
    if (epoch < 0) throw ValidationError("epoch must be >= 0");
    return cfg.initial_lr * std::pow(cfg.lr_decay, static_cast<double>(epoch));
}

/// Class-1 probability per example id.
inline ConfidenceScore predict_scores(const Model& m, const Dataset& ds) {
    if (ds.feature_dim != m.feature_dim())
        throw SchemaError("dataset feature_dim " + std::to_string(ds.feature_dim) +
                          " does not match model input " + std::to_string(m.feature_dim()));
    ConfidenceScore out;
    for (const auto& ex : ds.examples) out[ex.id] = forward(m, ex.features).second;
    return out;
}

/// What the per-epoch evaluation callback reports back to the trainer.
struct EpochEval {
    double auc_overall = std::numeric_limits<double>::quiet_NaN();
    std::map<DifficultyLevel, double> auc_per_level;
};

using Evaluator = std::function<EpochEval(const Model&)>;

/// Standard evaluator: overall + per-difficulty test AUC after each epoch.
inline Evaluator make_test_evaluator(Dataset test, std::map<std::string, GoldLabel> gold,
                                     DifficultyAssignment assignment) {
    return [test = std::move(test), gold = std::move(gold),
            assignment = std::move(assignment)](const Model& m) {
        EpochEval ev;
        const auto scores = predict_scores(m, test);
        const auto strat = stratified_auc(scores, gold, assignment);
        ev.auc_overall = strat.overall;
        ev.auc_per_level = strat.per_level;
        return ev;
    };
}

struct EpochRecord {
    int stage = 1;
    int epoch = 0;          // global across stages; drives the lr decay
    double lr = 0.0;
    double loss = 0.0;
    double auc_overall = std::numeric_limits<double>::quiet_NaN();
    std::map<DifficultyLevel, double> auc_per_level;
};

struct StageSummary {
    int stage = 1;
    int first_epoch = 0;
    int last_epoch = 0;
    double top5_auc = std::numeric_limits<double>::quiet_NaN();
};

struct TrainingLog {
    std::vector<EpochRecord> epochs;
    std::vector<StageSummary> stages;
};

inline std::string training_log_to_csv(const TrainingLog& log) {
    std::ostringstream out;
    out << "stage,epoch,lr,loss,auc_overall,auc_very_easy,auc_easy,auc_hard,auc_very_hard\n";
    auto cell = [](double v) {
        if (!std::isfinite(v)) return std::string("nan");
        char buf[32];
        auto res = std::to_chars(buf, buf + sizeof(buf), v);
        return std::string(buf, res.ptr);
    };
    for (const auto& r : log.epochs) {
        out << r.stage << "," << r.epoch << "," << cell(r.lr) << "," << cell(r.loss) << ","
            << cell(r.auc_overall);
        for (auto level : {DifficultyLevel::very_easy, DifficultyLevel::easy,
                           DifficultyLevel::hard, DifficultyLevel::very_hard}) {
            auto it = r.auc_per_level.find(level);
            out << ","
                << (it == r.auc_per_level.end() ? "nan" : cell(it->second));
        }
        out << "\n";
    }
    return out.str();
}

inline nlohmann::json training_log_to_json(const TrainingLog& log) {
    auto num = [](double v) {
        return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
    };
    nlohmann::json epochs = nlohmann::json::array();
    for (const auto& r : log.epochs) {
        nlohmann::json per_level;
        for (auto level : {DifficultyLevel::very_easy, DifficultyLevel::easy,
                           DifficultyLevel::hard, DifficultyLevel::very_hard}) {
            auto it = r.auc_per_level.find(level);
            per_level[to_string(level)] =
                it == r.auc_per_level.end() ? nlohmann::json(nullptr) : num(it->second);
        }
        epochs.push_back({{"stage", r.stage},
                          {"epoch", r.epoch},
                          {"lr", r.lr},
                          {"loss", r.loss},
                          {"auc_overall", num(r.auc_overall)},
                          {"auc_per_level", per_level}});
    }
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& s : log.stages)
        stages.push_back({{"stage", s.stage},
                          {"first_epoch", s.first_epoch},
                          {"last_epoch", s.last_epoch},
                          {"top5_auc", num(s.top5_auc)}});
    return {{"epochs", epochs}, {"stages", stages}};
}

/// JSON parameter dump: {"layer_sizes", "weights", "biases"}.
inline void save_model_json(const Model& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << nlohmann::json{{"layer_sizes", m.layer_sizes},
                          {"weights", m.weights},
                          {"biases", m.biases}}
               .dump()
        << "\n";
    if (!out) throw IoError("failed writing " + path);
}

inline Model load_model_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path + " for reading");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid model json: ") + e.what(), 1);
    }
    Model m;
    try {
        m.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
        m.weights = j.at("weights").get<std::vector<std::vector<double>>>();
        m.biases = j.at("biases").get<std::vector<std::vector<double>>>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("bad model json: ") + e.what());
    }
    if (m.layer_sizes.size() < 2 || m.weights.size() != m.layer_sizes.size() - 1 ||
        m.biases.size() != m.weights.size())
        throw SchemaError("model json shapes are inconsistent");
    return m;
}

/// Runs the staged schedule: each stage trains `stage.epochs` passes over
/// its example multiset with per-epoch shuffling and fresh Gaussian feature
/// jitter, evaluating after every epoch. Weights persist across stages
/// (fresh optimizer state per stage) and the lr-decay epoch counter runs
/// globally, unless reinit_per_stage is set.
inline std::pair<Model, TrainingLog> train_schedule(const Dataset& train,
                                                    const std::map<std::string, GoldLabel>& gold,
                                                    const CurriculumSchedule& schedule,
                                                    const LearnerConfig& cfg,
                                                    const Evaluator& evaluator) {
    validate_config(cfg);
    std::set<std::string> train_ids;
    for (const auto& ex : train.examples) train_ids.insert(ex.id);
    validate_schedule(schedule, train_ids);

    std::unordered_map<std::string, const AnnotatedExample*> by_id;
    by_id.reserve(train.examples.size());
    for (const auto& ex : train.examples) by_id[ex.id] = &ex;
    for (const auto& st : schedule.stages)
        for (const auto& id : st.example_ids)
            if (!gold.count(id)) throw ValidationError("no gold label for id " + id);

    Model model = init_model(cfg, train.feature_dim);
    RandomSource rng(derive_seed(cfg.seed, "train"));
    TrainingLog log;
    int global_epoch = 0;

    for (const auto& stage : schedule.stages) {
        if (cfg.reinit_per_stage && stage.index > 1) {
            LearnerConfig stage_cfg = cfg;
            stage_cfg.init_seed = derive_seed(cfg.init_seed.value_or(cfg.seed), "init",
                                              static_cast<std::uint64_t>(stage.index));
            model = init_model(stage_cfg, train.feature_dim);
        }
        AdamState adam = init_adam(model);

        std::vector<const AnnotatedExample*> pool;
        std::vector<int> pool_labels;
        pool.reserve(stage.example_ids.size());
        for (const auto& id : stage.example_ids) {
            pool.push_back(by_id.at(id));
            pool_labels.push_back(gold.at(id).label);
        }

        StageSummary summary;
        summary.stage = stage.index;
        summary.first_epoch = global_epoch;
        std::vector<double> stage_aucs;

        std::vector<std::size_t> order(pool.size());
        for (int ep = 0; ep < stage.epochs; ++ep) {
            const double lr = lr_at_epoch(cfg, global_epoch);
            std::iota(order.begin(), order.end(), std::size_t{0});
            rng.shuffle(order);

            double epoch_loss = 0.0;
            std::size_t seen = 0;
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
                double batch_mean;
                try {
                    batch_mean = batch_loss_and_gradients(model, feats, labels, grads);
                    adam_step(model, grads, adam, cfg, lr);
                } catch (const NumericError& e) {
                    throw NumericError(std::string(e.what()) + " (stage " +
                                       std::to_string(stage.index) + ", epoch " +
                                       std::to_string(global_epoch) + ")");
                }
                epoch_loss += batch_mean * static_cast<double>(stop - start);
                seen += stop - start;
            }
            epoch_loss /= static_cast<double>(seen);
            if (!std::isfinite(epoch_loss))
                throw NumericError("non-finite loss (stage " + std::to_string(stage.index) +
                                   ", epoch " + std::to_string(global_epoch) + ")");

            EpochRecord rec;
            rec.stage = stage.index;
            rec.epoch = global_epoch;
            rec.lr = lr;
            rec.loss = epoch_loss;
            if (evaluator) {
                const auto ev = evaluator(model);
                rec.auc_overall = ev.auc_overall;
                rec.auc_per_level = ev.auc_per_level;
                stage_aucs.push_back(ev.auc_overall);
            }
            summary.last_epoch = global_epoch;
            log.epochs.push_back(std::move(rec));
            ++global_epoch;
        }
        if (!stage_aucs.empty()) summary.top5_auc = top_k_mean(stage_aucs, 5);
        log.stages.push_back(summary);
    }
    return {std::move(model), std::move(log)};
}

}  // namespace ccl
