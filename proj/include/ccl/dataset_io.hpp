#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ccl/dataset.hpp"
#include "ccl/difficulty.hpp"
#include "ccl/errors.hpp"

namespace ccl {

namespace detail {

inline std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s, std::size_t line_no) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw ParseError("bad numeric field '" + s + "'", line_no);
    return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

inline void check_csv_safe(const std::string& s, const char* what) {
    if (s.find_first_of(",\"\n\r") != std::string::npos)
        throw ValidationError(std::string(what) + " '" + s + "' contains characters unsafe for csv");
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path + " for reading");
    return in;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    return out;
}

}  // namespace detail

inline nlohmann::json dataset_meta_json(const Dataset& ds) {
    return {{"num_annotators", ds.num_annotators},
            {"feature_dim", ds.feature_dim},
            {"class_names", ds.class_names}};
}

inline void apply_dataset_meta(Dataset& ds, const nlohmann::json& meta) {
    ds.num_annotators = meta.at("num_annotators").get<std::size_t>();
    ds.feature_dim = meta.at("feature_dim").get<std::size_t>();
    if (meta.contains("class_names"))
        ds.class_names = meta.at("class_names").get<std::vector<std::string>>();
}

/// JSONL layout: first line {"_meta": {...}}, then one example per line.
inline void save_dataset_jsonl(const Dataset& ds, const std::string& path) {
    auto out = detail::open_output(path);
    out << nlohmann::json{{"_meta", dataset_meta_json(ds)}}.dump() << "\n";
    for (const auto& ex : ds.examples) {
        nlohmann::json j{{"id", ex.id},
                         {"group_id", ex.group_id},
                         {"features", ex.features},
                         {"annotator_labels", ex.annotator_labels}};
        if (ex.direct_difficulty) j["direct_difficulty"] = *ex.direct_difficulty;
        if (ex.latent_difficulty) j["latent_difficulty"] = *ex.latent_difficulty;
        if (ex.latent_truth) j["latent_truth"] = *ex.latent_truth;
        out << j.dump() << "\n";
    }
    if (!out) throw IoError("failed writing " + path);
}

inline Dataset load_dataset_jsonl(const std::string& path) {
    auto in = detail::open_input(path);
    std::string line;
    std::size_t line_no = 0;

    Dataset ds;
    bool meta_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("invalid json: ") + e.what(), line_no);
        }
        try {
            if (!meta_seen) {
                if (!j.contains("_meta"))
                    throw ParseError("first line must carry the _meta header", line_no);
                apply_dataset_meta(ds, j.at("_meta"));
                meta_seen = true;
                continue;
            }
            AnnotatedExample ex;
            ex.id = j.at("id").get<std::string>();
            ex.group_id = j.at("group_id").get<std::string>();
            ex.features = j.at("features").get<std::vector<double>>();
            ex.annotator_labels = j.at("annotator_labels").get<std::vector<int>>();
            if (j.contains("direct_difficulty") && !j.at("direct_difficulty").is_null())
                ex.direct_difficulty = j.at("direct_difficulty").get<int>();
            if (j.contains("latent_difficulty") && !j.at("latent_difficulty").is_null())
                ex.latent_difficulty = j.at("latent_difficulty").get<double>();
            if (j.contains("latent_truth") && !j.at("latent_truth").is_null())
                ex.latent_truth = j.at("latent_truth").get<int>();
            ds.examples.push_back(std::move(ex));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("bad example record: ") + e.what(), line_no);
        }
    }
    if (!meta_seen) throw ParseError("missing _meta header", 1);
    validate_dataset(ds);
    return ds;
}

/// CSV layout: id,group_id,f0..f{F-1},a0..a{K-1},direct_difficulty with two
/// optional trailing diagnostic columns. Metadata lives in a sidecar file
/// at <path>.meta.json.
inline void save_dataset_csv(const Dataset& ds, const std::string& path) {
    auto out = detail::open_output(path);
    out << "id,group_id";
    for (std::size_t f = 0; f < ds.feature_dim; ++f) out << ",f" << f;
    for (std::size_t a = 0; a < ds.num_annotators; ++a) out << ",a" << a;
    out << ",direct_difficulty";

    bool any_latent = false;
    for (const auto& ex : ds.examples)
        any_latent = any_latent || ex.latent_difficulty || ex.latent_truth;
    if (any_latent) out << ",latent_difficulty,latent_truth";
    out << "\n";

    for (const auto& ex : ds.examples) {
        detail::check_csv_safe(ex.id, "id");
        detail::check_csv_safe(ex.group_id, "group_id");
        out << ex.id << "," << ex.group_id;
        for (double f : ex.features) out << "," << detail::format_double(f);
        for (int a : ex.annotator_labels) out << "," << a;
        out << ",";
        if (ex.direct_difficulty) out << *ex.direct_difficulty;
        if (any_latent) {
            out << ",";
            if (ex.latent_difficulty) out << detail::format_double(*ex.latent_difficulty);
            out << ",";
            if (ex.latent_truth) out << *ex.latent_truth;
        }
        out << "\n";
    }
    if (!out) throw IoError("failed writing " + path);

    auto meta_out = detail::open_output(path + ".meta.json");
    meta_out << dataset_meta_json(ds).dump(2) << "\n";
    if (!meta_out) throw IoError("failed writing " + path + ".meta.json");
}

inline Dataset load_dataset_csv(const std::string& path) {
    auto in = detail::open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty csv", 1);

    const auto header = detail::split_csv_line(line);
    std::size_t n_feat = 0, n_ann = 0;
    for (const auto& col : header) {
        if (col.size() > 1 && col[0] == 'f' && std::isdigit(static_cast<unsigned char>(col[1])))
            ++n_feat;
        if (col.size() > 1 && col[0] == 'a' && std::isdigit(static_cast<unsigned char>(col[1])))
            ++n_ann;
    }
    const bool has_latent =
        std::find(header.begin(), header.end(), "latent_difficulty") != header.end();
    const std::size_t base_cols = 2 + n_feat + n_ann + 1;
    const std::size_t want_cols = base_cols + (has_latent ? 2 : 0);
    if (header.size() != want_cols || header[0] != "id" || header[1] != "group_id" ||
        header[base_cols - 1] != "direct_difficulty")
        throw ParseError("unrecognized csv header", 1);

    Dataset ds;
    ds.feature_dim = n_feat;
    ds.num_annotators = n_ann;

    std::ifstream meta_in(path + ".meta.json");
    if (meta_in) {
        nlohmann::json meta;
        try {
            meta_in >> meta;
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("bad sidecar ") + path + ".meta.json: " + e.what(), 1);
        }
        apply_dataset_meta(ds, meta);
        if (ds.feature_dim != n_feat || ds.num_annotators != n_ann)
            throw SchemaError("csv header disagrees with sidecar metadata");
    }

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != want_cols)
            throw ParseError("expected " + std::to_string(want_cols) + " fields, got " +
                                 std::to_string(fields.size()),
                             line_no);
        AnnotatedExample ex;
        ex.id = fields[0];
        ex.group_id = fields[1];
        ex.features.reserve(n_feat);
        for (std::size_t f = 0; f < n_feat; ++f)
            ex.features.push_back(detail::parse_double(fields[2 + f], line_no));
        ex.annotator_labels.reserve(n_ann);
        for (std::size_t a = 0; a < n_ann; ++a)
            ex.annotator_labels.push_back(
                static_cast<int>(detail::parse_double(fields[2 + n_feat + a], line_no)));
        if (!fields[base_cols - 1].empty())
            ex.direct_difficulty =
                static_cast<int>(detail::parse_double(fields[base_cols - 1], line_no));
        if (has_latent) {
            if (!fields[base_cols].empty())
                ex.latent_difficulty = detail::parse_double(fields[base_cols], line_no);
            if (!fields[base_cols + 1].empty())
                ex.latent_truth =
                    static_cast<int>(detail::parse_double(fields[base_cols + 1], line_no));
        }
        ds.examples.push_back(std::move(ex));
    }
    validate_dataset(ds);
    return ds;
}

inline bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

inline Dataset load_dataset(const std::string& path) {
    if (ends_with(path, ".jsonl")) return load_dataset_jsonl(path);
    if (ends_with(path, ".csv")) return load_dataset_csv(path);
    throw ValidationError("unsupported dataset extension (want .jsonl or .csv): " + path);
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
    if (ends_with(path, ".jsonl")) return save_dataset_jsonl(ds, path);
    if (ends_with(path, ".csv")) return save_dataset_csv(ds, path);
    throw ValidationError("unsupported dataset extension (want .jsonl or .csv): " + path);
}

inline DifficultySource parse_difficulty_source(const std::string& s) {
    if (s == "agreement") return DifficultySource::agreement;
    if (s == "direct") return DifficultySource::direct;
    if (s == "self_taught") return DifficultySource::self_taught;
    if (s == "transfer") return DifficultySource::transfer;
    if (s == "random") return DifficultySource::random;
    throw ValidationError("unknown difficulty source '" + s + "'");
}

inline DifficultyLevel parse_difficulty_level(const std::string& s) {
    if (s == "very_easy") return DifficultyLevel::very_easy;
    if (s == "easy") return DifficultyLevel::easy;
    if (s == "hard") return DifficultyLevel::hard;
    if (s == "very_hard") return DifficultyLevel::very_hard;
    throw ValidationError("unknown difficulty level '" + s + "'");
}

/// Assignment JSONL: one {"id", "level", "source"} object per line.
inline void save_assignment_jsonl(const DifficultyAssignment& asg, const std::string& path) {
    auto out = detail::open_output(path);
    for (const auto& [id, level] : asg.bins)
        out << nlohmann::json{{"id", id},
                              {"level", to_string(level)},
                              {"source", to_string(asg.source)}}
                   .dump()
            << "\n";
    if (!out) throw IoError("failed writing " + path);
}

inline DifficultyAssignment load_assignment_jsonl(const std::string& path) {
    auto in = detail::open_input(path);
    DifficultyAssignment asg;
    std::string line;
    std::size_t line_no = 0;
    bool source_seen = false;
    bool fine_levels = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("invalid json: ") + e.what(), line_no);
        }
        std::string id, level_s, source_s;
        try {
            id = j.at("id").get<std::string>();
            level_s = j.at("level").get<std::string>();
            source_s = j.at("source").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("bad assignment record: ") + e.what(), line_no);
        }
        const auto level = parse_difficulty_level(level_s);
        const auto source = parse_difficulty_source(source_s);
        if (source_seen && source != asg.source)
            throw ParseError("inconsistent source across assignment records", line_no);
        asg.source = source;
        source_seen = true;
        if (!asg.bins.emplace(id, level).second)
            throw ParseError("duplicate id '" + id + "'", line_no);
        fine_levels = fine_levels || level == DifficultyLevel::very_easy ||
                      level == DifficultyLevel::very_hard;
    }
    if (asg.bins.empty()) throw ParseError("empty assignment file", 1);
    asg.granularity = fine_levels ? Granularity::fine : Granularity::coarse;
    return asg;
}

}  // namespace ccl
