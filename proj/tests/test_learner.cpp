#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "ccl/ccl.hpp"
#include "helpers.hpp"

using namespace ccl;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

// Logistic head only (no hidden layers) with every parameter zeroed.
Model zero_logistic(std::size_t feature_dim) {
    Model m;
    m.layer_sizes = {feature_dim, 2};
    m.weights = {std::vector<double>(2 * feature_dim, 0.0)};
    m.biases = {std::vector<double>(2, 0.0)};
    return m;
}

CurriculumSchedule single_stage_all(const Dataset& ds, int epochs) {
    Stage st;
    st.index = 1;
    st.epochs = epochs;
    for (const auto& ex : ds.examples) st.example_ids.push_back(ex.id);
    std::sort(st.example_ids.begin(), st.example_ids.end());
    CurriculumSchedule sched;
    sched.kind = ScheduleKind::single_stage;
    sched.stages.push_back(std::move(st));
    return sched;
}

}  // namespace

TEST_CASE("learner config validation rejects bad fields") {
    LearnerConfig ok;
    CHECK_NOTHROW(validate_config(ok));

    LearnerConfig c = ok;
    c.epochs = 0;
    CHECK_THROWS_AS(validate_config(c), ValidationError);

    c = ok;
    c.initial_lr = 0.0;
    CHECK_THROWS_AS(validate_config(c), ValidationError);

    c = ok;
    c.lr_decay = 0.0;
    CHECK_THROWS_AS(validate_config(c), ValidationError);
    c.lr_decay = 1.5;
    CHECK_THROWS_AS(validate_config(c), ValidationError);
    c.lr_decay = 1.0;   // no decay is allowed
    CHECK_NOTHROW(validate_config(c));

    c = ok;
    c.batch_size = 0;
    CHECK_THROWS_AS(validate_config(c), ValidationError);

    c = ok;
    c.augment_sigma = -0.1;
    CHECK_THROWS_AS(validate_config(c), ValidationError);

    c = ok;
    c.hidden_sizes = {8, 0};
    CHECK_THROWS_AS(validate_config(c), ValidationError);
}

TEST_CASE("model initialization shapes, parameter count, and seeding") {
    LearnerConfig cfg;
    cfg.hidden_sizes = {8, 8};
    cfg.seed = 3;
    const Model m = init_model(cfg, 4);

    CHECK(m.layer_sizes == std::vector<std::size_t>{4, 8, 8, 2});
    CHECK(m.num_layers() == 3);
    CHECK(m.feature_dim() == 4);
    // (8*4 + 8) + (8*8 + 8) + (2*8 + 2)
    CHECK(m.parameter_count() == 130);
    for (const auto& b : m.biases)
        for (double v : b) CHECK(v == 0.0);

    SECTION("same seed reproduces the weights, another seed does not") {
        const Model again = init_model(cfg, 4);
        CHECK(again.weights == m.weights);

        LearnerConfig other = cfg;
        other.seed = 4;
        CHECK(init_model(other, 4).weights != m.weights);
    }

    SECTION("init_seed pins the weights independently of the training seed") {
        LearnerConfig a = cfg, b = cfg;
        a.seed = 1;
        b.seed = 2;
        a.init_seed = 77;
        b.init_seed = 77;
        CHECK(init_model(a, 4).weights == init_model(b, 4).weights);
    }

    SECTION("bad inputs") {
        CHECK_THROWS_AS(init_model(cfg, 0), ValidationError);
    }
}

TEST_CASE("forward pass computes the softmax head") {
    SECTION("all-zero model is maximally uncertain") {
        const Model m = zero_logistic(3);
        const auto [p0, p1] = forward(m, {0.4, -1.0, 2.0});
        CHECK(p0 == Approx(0.5).margin(1e-15));
        CHECK(p1 == Approx(0.5).margin(1e-15));
    }

    SECTION("identity logits give the usual sigmoid") {
        Model m = zero_logistic(2);
        m.weights[0] = {1.0, 0.0, 0.0, 1.0};    // logit0 = x0, logit1 = x1
        const auto [p0, p1] = forward(m, {1.0, 0.0});
        CHECK(p0 == Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-12));
        CHECK(p0 + p1 == Approx(1.0).margin(1e-15));
    }

    SECTION("hidden rectifier clips negative pre-activations") {
        Model m;
        m.layer_sizes = {1, 1, 2};
        m.weights = {{-1.0}, {2.0, 0.0}};
        m.biases = {{0.0}, {0.3, -0.1}};
        // x = 2 drives the hidden unit to -2, clipped to 0, so only the
        // head biases reach the softmax.
        const auto [p0, p1] = forward(m, {2.0});
        const double e0 = std::exp(0.3), e1 = std::exp(-0.1);
        CHECK(p0 == Approx(e0 / (e0 + e1)).epsilon(1e-12));
        // x = -2 activates the unit (value 2) and boosts logit 0 by 4.
        const auto [q0, q1] = forward(m, {-2.0});
        CHECK(q0 > p0);
        CHECK(q0 == Approx(std::exp(4.3) / (std::exp(4.3) + e1)).epsilon(1e-12));
    }

    SECTION("input validation") {
        const Model m = zero_logistic(2);
        CHECK_THROWS_AS(forward(m, {1.0}), SchemaError);
        CHECK_THROWS_AS(forward(m, {1.0, std::nan("")}), NumericError);
    }
}

TEST_CASE("batch loss and gradients match hand-derived values") {
    SECTION("uniform softmax loses ln 2") {
        const Model m = zero_logistic(1);
        CHECK(batch_loss(m, {{1.0}}, {1}) == Approx(std::log(2.0)).epsilon(1e-14));
    }

    SECTION("single-example logistic gradient") {
        const Model m = zero_logistic(1);
        auto g = zero_gradients(m);
        const double loss = batch_loss_and_gradients(m, {{1.0}}, {1}, g);
        CHECK(loss == Approx(std::log(2.0)).epsilon(1e-14));
        // dz = softmax - onehot = (0.5, -0.5); input activation is 1.
        CHECK(g.weights[0][0] == Approx(0.5).margin(1e-15));
        CHECK(g.weights[0][1] == Approx(-0.5).margin(1e-15));
        CHECK(g.biases[0][0] == Approx(0.5).margin(1e-15));
        CHECK(g.biases[0][1] == Approx(-0.5).margin(1e-15));
    }

    SECTION("batch mean halves the one-example gradient") {
        const Model m = zero_logistic(1);
        auto g = zero_gradients(m);
        batch_loss_and_gradients(m, {{1.0}, {0.0}}, {1, 1}, g);
        // second example has zero features, so only the bias rows add up
        CHECK(g.weights[0][0] == Approx(0.25).margin(1e-15));
        CHECK(g.biases[0][0] == Approx(0.5).margin(1e-15));
        CHECK(g.biases[0][1] == Approx(-0.5).margin(1e-15));
    }

    SECTION("rejects malformed batches") {
        const Model m = zero_logistic(1);
        auto g = zero_gradients(m);
        CHECK_THROWS_AS(batch_loss_and_gradients(m, {}, {}, g), ValidationError);
        CHECK_THROWS_AS(batch_loss_and_gradients(m, {{1.0}}, {1, 0}, g), ValidationError);
        CHECK_THROWS_AS(batch_loss_and_gradients(m, {{1.0}}, {2}, g), ValidationError);
    }
}

TEST_CASE("analytic gradients agree with central differences") {
    LearnerConfig cfg;
    cfg.hidden_sizes = {4};
    cfg.seed = 29;
    Model m = init_model(cfg, 3);

    std::mt19937_64 rng(101);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<std::vector<double>> feats;
    std::vector<int> labels;
    for (int i = 0; i < 5; ++i) {
        feats.push_back({nd(rng), nd(rng), nd(rng)});
        labels.push_back(i % 2);
    }

    auto analytic = zero_gradients(m);
    batch_loss_and_gradients(m, feats, labels, analytic);

    const double h = 1e-6;
    auto check_block = [&](std::vector<double>& params, const std::vector<double>& grads) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double keep = params[i];
            params[i] = keep + h;
            const double up = batch_loss(m, feats, labels);
            params[i] = keep - h;
            const double dn = batch_loss(m, feats, labels);
            params[i] = keep;
            const double numeric = (up - dn) / (2.0 * h);
            const double denom = std::max({std::abs(numeric), std::abs(grads[i]), 1e-6});
            CHECK(std::abs(numeric - grads[i]) / denom < 1e-5);
        }
    };
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        check_block(m.weights[l], analytic.weights[l]);
        check_block(m.biases[l], analytic.biases[l]);
    }
}

TEST_CASE("adam takes bias-corrected signed steps") {
    LearnerConfig cfg;

    SECTION("first update moves each weight by about lr against the gradient sign") {
        Model m = zero_logistic(1);
        auto st = init_adam(m);
        Gradients g = zero_gradients(m);
        g.weights[0] = {0.5, -0.5};
        adam_step(m, g, st, cfg, 1e-3);
        CHECK(st.step == 1);
        CHECK(m.weights[0][0] == Approx(-1e-3).epsilon(1e-6));
        CHECK(m.weights[0][1] == Approx(1e-3).epsilon(1e-6));
        CHECK(m.biases[0][0] == 0.0);   // zero gradient, zero update
    }

    SECTION("constant gradient keeps steps near -lr thanks to bias correction") {
        Model m = zero_logistic(1);
        auto st = init_adam(m);
        Gradients g = zero_gradients(m);
        g.weights[0] = {1.0, 1.0};
        adam_step(m, g, st, cfg, 1e-3);
        adam_step(m, g, st, cfg, 1e-3);
        CHECK(st.step == 2);
        CHECK(m.weights[0][0] == Approx(-2e-3).epsilon(1e-6));
    }

    SECTION("non-finite gradients are reported with their location") {
        Model m = zero_logistic(1);
        auto st = init_adam(m);
        Gradients g = zero_gradients(m);
        g.weights[0] = {std::numeric_limits<double>::infinity(), 0.0};
        CHECK_THROWS_WITH(adam_step(m, g, st, cfg, 1e-3),
                          ContainsSubstring("layer 0 weights"));
    }
}

TEST_CASE("learning rate decays multiplicatively per epoch") {
    LearnerConfig cfg;   // 1e-3, decay 0.91
    CHECK(lr_at_epoch(cfg, 0) == Approx(1e-3).epsilon(1e-15));
    CHECK(lr_at_epoch(cfg, 1) == Approx(9.1e-4).epsilon(1e-15));
    CHECK(lr_at_epoch(cfg, 5) == Approx(1e-3 * std::pow(0.91, 5)).epsilon(1e-15));
    CHECK_THROWS_AS(lr_at_epoch(cfg, -1), ValidationError);
}

TEST_CASE("predict_scores returns class-1 probabilities per id") {
    const auto ds = helpers::separable_dataset(6);
    const Model m = zero_logistic(2);
    const auto scores = predict_scores(m, ds);
    CHECK(scores.size() == 6);
    for (const auto& [id, s] : scores) CHECK(s == Approx(0.5).margin(1e-15));

    const Model wrong = zero_logistic(5);
    CHECK_THROWS_AS(predict_scores(wrong, ds), SchemaError);
}

TEST_CASE("staged training runs a global epoch clock and learns the task") {
    const auto ds = helpers::separable_dataset(80);
    const auto gold = gold_labels(ds);
    const auto fine = bin_by_agreement(ds, Granularity::fine);
    const auto sched = build_staged(fine, StageDirection::easy_first, 4);

    LearnerConfig cfg;
    cfg.hidden_sizes = {8};
    cfg.initial_lr = 0.01;
    cfg.lr_decay = 0.95;
    cfg.batch_size = 16;
    cfg.augment_sigma = 0.05;
    cfg.seed = 11;

    int eval_calls = 0;
    auto base_eval = make_test_evaluator(ds, gold, fine);
    Evaluator counting = [&](const Model& m) {
        ++eval_calls;
        return base_eval(m);
    };

    const auto [model, log] = train_schedule(ds, gold, sched, cfg, counting);

    REQUIRE(log.epochs.size() == 16);
    REQUIRE(log.stages.size() == 4);
    CHECK(eval_calls == 16);

    for (std::size_t k = 0; k < log.epochs.size(); ++k) {
        CHECK(log.epochs[k].epoch == static_cast<int>(k));
        CHECK(log.epochs[k].lr ==
              Approx(lr_at_epoch(cfg, static_cast<int>(k))).epsilon(1e-15));
        CHECK(std::isfinite(log.epochs[k].loss));
    }
    for (int s = 0; s < 4; ++s) {
        CHECK(log.stages[static_cast<std::size_t>(s)].stage == s + 1);
        CHECK(log.stages[static_cast<std::size_t>(s)].first_epoch == 4 * s);
        CHECK(log.stages[static_cast<std::size_t>(s)].last_epoch == 4 * s + 3);
        CHECK(std::isfinite(log.stages[static_cast<std::size_t>(s)].top5_auc));
    }
    CHECK(log.epochs.back().auc_overall > 0.85);

    SECTION("csv log has the documented header and one row per epoch") {
        const std::string csv = training_log_to_csv(log);
        const auto first_newline = csv.find('\n');
        CHECK(csv.substr(0, first_newline) ==
              "stage,epoch,lr,loss,auc_overall,auc_very_easy,auc_easy,auc_hard,auc_very_hard");
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 17);
    }

    SECTION("json log mirrors the epoch and stage records") {
        const auto j = training_log_to_json(log);
        CHECK(j.at("epochs").size() == 16);
        CHECK(j.at("stages").size() == 4);
        CHECK(j.at("epochs").at(0).at("stage") == 1);
    }

    SECTION("training is reproducible per seed") {
        const auto [m2, log2] = train_schedule(ds, gold, sched, cfg, {});
        CHECK(m2.weights == model.weights);
        CHECK(m2.biases == model.biases);

        LearnerConfig other = cfg;
        other.seed = 12;
        const auto [m3, log3] = train_schedule(ds, gold, sched, other, {});
        CHECK(m3.weights != model.weights);
    }
}

TEST_CASE("stage summaries average the five best epoch AUCs of the stage") {
    const auto ds = helpers::separable_dataset(20);
    const auto gold = gold_labels(ds);
    const auto sched = single_stage_all(ds, 6);

    LearnerConfig cfg;
    cfg.batch_size = 20;
    cfg.augment_sigma = 0.0;
    cfg.seed = 5;

    int calls = 0;
    Evaluator fake = [&](const Model&) {
        EpochEval ev;
        ev.auc_overall = 0.1 * static_cast<double>(++calls);
        return ev;
    };
    const auto [model, log] = train_schedule(ds, gold, sched, cfg, fake);
    REQUIRE(log.stages.size() == 1);
    // evaluations yield 0.1..0.6; the best five are 0.2..0.6
    CHECK(log.stages[0].top5_auc == Approx(0.4).epsilon(1e-12));
}

TEST_CASE("weights persist across stages unless reinit is requested") {
    const auto ds = helpers::separable_dataset(40);
    const auto gold = gold_labels(ds);

    CurriculumSchedule two = single_stage_all(ds, 3);
    two.kind = ScheduleKind::curriculum;
    Stage second = two.stages[0];
    second.index = 2;
    two.stages.push_back(second);

    LearnerConfig cfg;
    cfg.hidden_sizes = {4};
    cfg.batch_size = 8;
    cfg.seed = 7;

    const auto [keep, log_keep] = train_schedule(ds, gold, two, cfg, {});

    LearnerConfig re = cfg;
    re.reinit_per_stage = true;
    const auto [fresh, log_fresh] = train_schedule(ds, gold, two, re, {});
    CHECK(fresh.weights != keep.weights);

    SECTION("reinit only fires from stage two onward") {
        const auto one = single_stage_all(ds, 3);
        const auto [a, la] = train_schedule(ds, gold, one, cfg, {});
        const auto [b, lb] = train_schedule(ds, gold, one, re, {});
        CHECK(a.weights == b.weights);
        CHECK(a.biases == b.biases);
    }
}

TEST_CASE("train_schedule validates its inputs and flags numeric blow-ups") {
    const auto ds = helpers::separable_dataset(20);
    auto gold = gold_labels(ds);
    const auto sched = single_stage_all(ds, 2);
    LearnerConfig cfg;
    cfg.batch_size = 4;

    SECTION("schedule ids must exist in the training set") {
        CurriculumSchedule bad = sched;
        bad.stages[0].example_ids.push_back("ghost");
        CHECK_THROWS_AS(train_schedule(ds, gold, bad, cfg, {}), ValidationError);
    }

    SECTION("every scheduled id needs a gold label") {
        gold.erase(ds.examples.front().id);
        CHECK_THROWS_WITH(train_schedule(ds, gold, sched, cfg, {}),
                          ContainsSubstring("no gold label"));
    }

    SECTION("exploding updates surface as numeric errors with context") {
        LearnerConfig hot = cfg;
        hot.hidden_sizes = {4};
        hot.initial_lr = 1e308;
        hot.epochs = 3;
        CurriculumSchedule s3 = single_stage_all(ds, 3);
        CHECK_THROWS_WITH(train_schedule(ds, gold, s3, hot, {}),
                          ContainsSubstring("stage 1"));
    }
}

TEST_CASE("model json round trip preserves parameters exactly") {
    LearnerConfig cfg;
    cfg.hidden_sizes = {5};
    cfg.seed = 13;
    const Model m = init_model(cfg, 3);

    const auto dir = helpers::scratch_dir("model_roundtrip");
    const auto path = (std::filesystem::path(dir) / "model.json").string();
    save_model_json(m, path);
    const Model back = load_model_json(path);

    CHECK(back.layer_sizes == m.layer_sizes);
    CHECK(back.weights == m.weights);
    CHECK(back.biases == m.biases);

    const std::vector<double> x{0.3, -1.2, 0.8};
    CHECK(forward(back, x) == forward(m, x));

    SECTION("corrupt and inconsistent files are rejected") {
        const auto bad = (std::filesystem::path(dir) / "bad.json").string();
        std::ofstream(bad) << "{ not json";
        CHECK_THROWS_AS(load_model_json(bad), ParseError);

        const auto shapes = (std::filesystem::path(dir) / "shapes.json").string();
        std::ofstream(shapes) << R"({"layer_sizes":[2,2],"weights":[],"biases":[]})";
        CHECK_THROWS_AS(load_model_json(shapes), SchemaError);
        CHECK_THROWS_AS(load_model_json((std::filesystem::path(dir) / "nope.json").string()),
                        IoError);
    }
}
