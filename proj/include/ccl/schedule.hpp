#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ccl/difficulty.hpp"
#include "ccl/errors.hpp"
#include "ccl/rng.hpp"

namespace ccl {

/// One training stage: a materialized multiset of example ids (duplicates
/// encode oversampling) trained for a fixed number of epochs.
struct Stage {
    int index = 1;
    std::vector<std::string> example_ids;
    int epochs = 50;
};

enum class ScheduleKind { curriculum, anti, random_control, direct, single_stage, two_stage };

inline const char* to_string(ScheduleKind kind) {
    switch (kind) {
        case ScheduleKind::curriculum: return "curriculum";
        case ScheduleKind::anti: return "anti";
        case ScheduleKind::random_control: return "random_control";
        case ScheduleKind::direct: return "direct";
        case ScheduleKind::single_stage: return "single_stage";
        case ScheduleKind::two_stage: return "two_stage";
    }
    return "?";
}

inline ScheduleKind parse_schedule_kind(const std::string& s) {
    if (s == "curriculum") return ScheduleKind::curriculum;
    if (s == "anti") return ScheduleKind::anti;
    if (s == "random_control") return ScheduleKind::random_control;
    if (s == "direct") return ScheduleKind::direct;
    if (s == "single_stage") return ScheduleKind::single_stage;
    if (s == "two_stage") return ScheduleKind::two_stage;
    throw ValidationError("unknown schedule kind '" + s + "'");
}

struct CurriculumSchedule {
    std::vector<Stage> stages;
    ScheduleKind kind = ScheduleKind::curriculum;
    nlohmann::json provenance;   // assignment source or pacing ratio used

    std::size_t total_epochs() const {
        std::size_t n = 0;
        for (const auto& st : stages) n += static_cast<std::size_t>(st.epochs);
        return n;
    }
};

enum class StageDirection { easy_first, hard_first };

namespace detail {

inline bool cumulative_kind(ScheduleKind kind) {
    return kind == ScheduleKind::curriculum || kind == ScheduleKind::anti ||
           kind == ScheduleKind::random_control || kind == ScheduleKind::direct;
}

}  // namespace detail

/// Cumulative nesting check plus id-existence against the training set.
inline void validate_schedule(const CurriculumSchedule& sched,
                              const std::set<std::string>& train_ids) {
    if (sched.stages.empty()) throw ValidationError("schedule has no stages");
    std::set<std::string> prev;
    int want_index = 1;
    for (const auto& st : sched.stages) {
        if (st.index != want_index++) throw ValidationError("stage indices must run 1..n");
        if (st.example_ids.empty())
            throw ValidationError("stage " + std::to_string(st.index) + " is empty");
        if (st.epochs < 1)
            throw ValidationError("stage " + std::to_string(st.index) + " has epochs < 1");
        std::set<std::string> cur(st.example_ids.begin(), st.example_ids.end());
        for (const auto& id : cur)
            if (!train_ids.count(id))
                throw ValidationError("stage " + std::to_string(st.index) +
                                      " references unknown id '" + id + "'");
        if (detail::cumulative_kind(sched.kind))
            for (const auto& id : prev)
                if (!cur.count(id))
                    throw ValidationError("stage " + std::to_string(st.index) +
                                          " drops id '" + id + "' from an earlier stage");
        prev = std::move(cur);
    }
}

/// Four cumulative stages over the fine bins. easy_first accumulates
/// very_easy, +easy, +hard, +very_hard; hard_first reverses the order.
/// Every stage keeps all earlier stages' examples.
inline CurriculumSchedule build_staged(const DifficultyAssignment& assignment,
                                       StageDirection direction, int epochs_per_stage) {
    if (assignment.granularity != Granularity::fine)
        throw ValidationError("build_staged needs a fine-grained assignment");
    if (epochs_per_stage < 1) throw ValidationError("epochs_per_stage must be >= 1");

    std::vector<DifficultyLevel> order{DifficultyLevel::very_easy, DifficultyLevel::easy,
                                       DifficultyLevel::hard, DifficultyLevel::very_hard};
    if (direction == StageDirection::hard_first)
        std::reverse(order.begin(), order.end());

    CurriculumSchedule sched;
    sched.kind = assignment.source == DifficultySource::direct
                     ? ScheduleKind::direct
                     : (direction == StageDirection::easy_first ? ScheduleKind::curriculum
                                                                : ScheduleKind::anti);
    sched.provenance = {{"source", to_string(assignment.source)},
                        {"direction", direction == StageDirection::easy_first ? "easy_first"
                                                                              : "hard_first"}};

    std::vector<std::string> cumulative;
    for (int s = 0; s < 4; ++s) {
        for (const auto& [id, level] : assignment.bins)
            if (level == order[static_cast<std::size_t>(s)]) cumulative.push_back(id);
        if (s == 0 && cumulative.empty())
            throw ValidationError("first-stage bin (" + std::string(to_string(order[0])) +
                                  ") is empty");
        Stage st;
        st.index = s + 1;
        st.epochs = epochs_per_stage;
        st.example_ids = cumulative;
        std::sort(st.example_ids.begin(), st.example_ids.end());
        sched.stages.push_back(std::move(st));
    }
    return sched;
}

/// Size-matched control: nested uniform random subsets of the given sizes.
inline CurriculumSchedule build_random_control(const std::vector<std::string>& train_ids,
                                               const std::vector<std::size_t>& stage_sizes,
                                               int epochs_per_stage, std::uint64_t seed) {
    if (stage_sizes.size() != 4) throw ValidationError("random control needs 4 stage sizes");
    if (epochs_per_stage < 1) throw ValidationError("epochs_per_stage must be >= 1");
    for (std::size_t i = 0; i + 1 < stage_sizes.size(); ++i)
        if (stage_sizes[i] >= stage_sizes[i + 1])
            throw ValidationError("random control stage sizes must be strictly increasing");
    if (stage_sizes.front() == 0) throw ValidationError("first stage size must be positive");
    if (stage_sizes.back() != train_ids.size())
        throw ValidationError("last stage size must equal the training set size");

    std::vector<std::string> pool = train_ids;
    std::sort(pool.begin(), pool.end());
    if (std::adjacent_find(pool.begin(), pool.end()) != pool.end())
        throw ValidationError("duplicate training ids");
    RandomSource rng(derive_seed(seed, "random_control"));
    rng.shuffle(pool);

    CurriculumSchedule sched;
    sched.kind = ScheduleKind::random_control;
    sched.provenance = {{"source", "random"}, {"seed", seed}};
    for (int s = 0; s < 4; ++s) {
        Stage st;
        st.index = s + 1;
        st.epochs = epochs_per_stage;
        st.example_ids.assign(pool.begin(),
                              pool.begin() + static_cast<std::ptrdiff_t>(stage_sizes[s]));
        std::sort(st.example_ids.begin(), st.example_ids.end());
        sched.stages.push_back(std::move(st));
    }
    return sched;
}

/// One stage holding exactly the union of the named bins.
inline CurriculumSchedule build_single_stage(const DifficultyAssignment& assignment,
                                             const std::set<DifficultyLevel>& included_bins,
                                             int epochs) {
    if (included_bins.empty()) throw ValidationError("no bins selected");
    if (epochs < 1) throw ValidationError("epochs must be >= 1");

    Stage st;
    st.index = 1;
    st.epochs = epochs;
    for (const auto& [id, level] : assignment.bins)
        if (included_bins.count(level)) st.example_ids.push_back(id);
    if (st.example_ids.empty()) throw ValidationError("selected bins are empty");
    std::sort(st.example_ids.begin(), st.example_ids.end());

    CurriculumSchedule sched;
    sched.kind = ScheduleKind::single_stage;
    nlohmann::json bins = nlohmann::json::array();
    for (auto level : included_bins) bins.push_back(to_string(level));
    sched.provenance = {{"source", to_string(assignment.source)}, {"bins", bins}};
    sched.stages.push_back(std::move(st));
    return sched;
}

/// Single-step pacing: stage 1 is all easy examples; stage 2 re-uses them
/// plus h hard examples chosen so the hard fraction hits hard_ratio, with
/// h = round(hard_ratio/(1-hard_ratio) * |Easy|). Hard examples are drawn
/// without replacement while they last, with replacement beyond that. At
/// hard_ratio = 1 stage 2 is the hard bin alone.
inline CurriculumSchedule build_two_stage(const DifficultyAssignment& assignment,
                                          double hard_ratio, int epochs_per_stage,
                                          std::uint64_t seed) {
    if (!(hard_ratio > 0.0) || hard_ratio > 1.0)
        throw ValidationError("hard_ratio must be in (0, 1]");
    if (epochs_per_stage < 1) throw ValidationError("epochs_per_stage must be >= 1");

    std::vector<std::string> easy, hard;
    for (const auto& [id, level] : assignment.bins) {
        if (level == DifficultyLevel::easy || level == DifficultyLevel::very_easy)
            easy.push_back(id);
        else
            hard.push_back(id);
    }
    std::sort(easy.begin(), easy.end());
    std::sort(hard.begin(), hard.end());
    if (easy.empty()) throw ValidationError("easy bin is empty");
    if (hard.empty()) throw ValidationError("hard bin is empty");

    CurriculumSchedule sched;
    sched.kind = ScheduleKind::two_stage;
    sched.provenance = {{"hard_ratio", hard_ratio}, {"seed", seed}};

    Stage s1;
    s1.index = 1;
    s1.epochs = epochs_per_stage;
    s1.example_ids = easy;
    sched.stages.push_back(s1);

    Stage s2;
    s2.index = 2;
    s2.epochs = epochs_per_stage;
    if (hard_ratio == 1.0) {
        s2.example_ids = hard;
    } else {
        s2.example_ids = easy;
        const auto h = static_cast<std::size_t>(std::llround(
            hard_ratio / (1.0 - hard_ratio) * static_cast<double>(easy.size())));
        RandomSource rng(derive_seed(seed, "two_stage"));
        if (h <= hard.size()) {
            for (std::size_t idx : rng.sample_without_replacement(hard.size(), h))
                s2.example_ids.push_back(hard[idx]);
        } else {
            for (std::size_t i = 0; i < h; ++i)
                s2.example_ids.push_back(hard[rng.uniform_index(hard.size())]);
        }
    }
    sched.stages.push_back(std::move(s2));
    return sched;
}

inline nlohmann::json schedule_to_json(const CurriculumSchedule& sched) {
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& st : sched.stages)
        stages.push_back({{"index", st.index},
                          {"epochs", st.epochs},
                          {"example_ids", st.example_ids}});
    return {{"kind", to_string(sched.kind)},
            {"stages", stages},
            {"provenance", sched.provenance}};
}

inline CurriculumSchedule schedule_from_json(const nlohmann::json& j) {
    CurriculumSchedule sched;
    try {
        sched.kind = parse_schedule_kind(j.at("kind").get<std::string>());
        if (j.contains("provenance")) sched.provenance = j.at("provenance");
        for (const auto& js : j.at("stages")) {
            Stage st;
            st.index = js.at("index").get<int>();
            st.epochs = js.at("epochs").get<int>();
            st.example_ids = js.at("example_ids").get<std::vector<std::string>>();
            sched.stages.push_back(std::move(st));
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("bad schedule json: ") + e.what());
    }
    return sched;
}

inline void save_schedule_json(const CurriculumSchedule& sched, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << schedule_to_json(sched).dump(2) << "\n";
    if (!out) throw IoError("failed writing " + path);
}

inline CurriculumSchedule load_schedule_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path + " for reading");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid schedule json: ") + e.what(), 1);
    }
    return schedule_from_json(j);
}

}  // namespace ccl
