#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ccl/errors.hpp"
#include "ccl/experiment.hpp"

namespace ccl {

enum class ReportFormat { csv, json, markdown };

inline ReportFormat parse_report_format(const std::string& s) {
    if (s == "csv") return ReportFormat::csv;
    if (s == "json") return ReportFormat::json;
    if (s == "markdown" || s == "md") return ReportFormat::markdown;
    throw ValidationError("unknown report format '" + s + "' (want csv, json, or markdown)");
}

namespace detail {

inline std::string fmt(const char* spec, double v) {
    if (!std::isfinite(v)) return "";
    char buf[48];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

inline std::string fmt_pct(double v01) { return fmt("%.1f", v01 * 100.0); }
inline std::string fmt_kappa(double v) { return fmt("%.3f", v); }
inline std::string fmt_p(double v) { return fmt("%.3e", v); }
inline std::string fmt_t(double v) { return fmt("%.3f", v); }

inline std::string pct_pm(const SeedSummary& s) {
    return fmt_pct(s.mean) + " ± " + fmt_pct(s.std_dev);
}

inline std::string kappa_pm(const SeedSummary& s) {
    return fmt_kappa(s.mean) + " ± " + fmt_kappa(s.std_dev);
}

constexpr DifficultyLevel kLevelOrder[4] = {DifficultyLevel::very_easy, DifficultyLevel::easy,
                                            DifficultyLevel::hard, DifficultyLevel::very_hard};

}  // namespace detail

/// Per-(arm, stage) table. AUC values are percent at one decimal; p-values
/// scientific.
inline std::string experiment_report_csv(const ExperimentReport& rep) {
    std::ostringstream out;
    out << "arm,kind,stage,epochs,n_seeds,auc_pct_mean,auc_pct_std,auc_very_easy_pct,"
           "auc_easy_pct,auc_hard_pct,auc_very_hard_pct,t_vs_baseline,p_vs_baseline,"
           "significance\n";
    for (const auto& ar : rep.arms) {
        for (const auto& sr : ar.stages) {
            out << ar.spec.name << "," << to_string(ar.spec.kind) << "," << sr.stage << ","
                << sr.epochs << "," << sr.auc.n << "," << detail::fmt_pct(sr.auc.mean) << ","
                << detail::fmt_pct(sr.auc.std_dev);
            for (auto level : detail::kLevelOrder) {
                auto it = sr.per_level.find(level);
                out << "," << (it == sr.per_level.end() ? "" : detail::fmt_pct(it->second.mean));
            }
            if (sr.has_ttest)
                out << "," << detail::fmt_t(sr.vs_baseline.t) << ","
                    << detail::fmt_p(sr.vs_baseline.p) << ","
                    << significance_stars(sr.vs_baseline.p);
            else
                out << ",,,";
            out << "\n";
        }
    }
    return out.str();
}

/// Tidy kappa table: the model-vs-annotator sweep rows plus the
/// per-annotator reference rows.
inline std::string experiment_kappa_csv(const ExperimentReport& rep) {
    std::ostringstream out;
    out << "section,threshold,label,stage,kappa_mean,kappa_std,n_seeds\n";
    for (const auto& c : rep.kappa_curves)
        for (std::size_t t = 0; t < rep.kappa_thresholds.size(); ++t)
            out << "model_vs_annotators," << detail::fmt("%.2f", rep.kappa_thresholds[t]) << ","
                << c.arm << "," << c.stage << "," << detail::fmt_kappa(c.summary[t].mean) << ","
                << detail::fmt_kappa(c.summary[t].std_dev) << "," << c.summary[t].n << "\n";
    for (std::size_t a = 0; a < rep.annotator_reference.size(); ++a)
        out << "annotator_reference,,annotator_" << a << ",,"
            << detail::fmt_kappa(rep.annotator_reference[a].mean) << ","
            << detail::fmt_kappa(rep.annotator_reference[a].std_dev) << ","
            << rep.annotator_reference[a].n << "\n";
    return out.str();
}

inline std::string experiment_report_markdown(const ExperimentReport& rep) {
    std::ostringstream out;
    out << "# Experiment report\n\n";
    out << "- config hash: `" << rep.config_hash << "`\n";
    out << "- seeds: " << rep.seeds.size() << "\n";
    out << "- baseline arm: " << rep.baseline_arm << "\n";
    if (rep.partial) out << "- **partial report** (run aborted before completion)\n";
    out << "\n## Overall test AUC (%)\n\n";
    out << "| Arm | Kind | Stage | Epochs | AUC (%) | p vs baseline | Sig. |\n";
    out << "|---|---|---|---|---|---|---|\n";
    for (const auto& ar : rep.arms) {
        for (const auto& sr : ar.stages) {
            out << "| " << ar.spec.name << " | " << to_string(ar.spec.kind) << " | " << sr.stage
                << " | " << sr.epochs << " | " << detail::pct_pm(sr.auc) << " | ";
            if (sr.has_ttest)
                out << detail::fmt_p(sr.vs_baseline.p) << " | "
                    << significance_stars(sr.vs_baseline.p) << " |\n";
            else
                out << " |  |\n";
        }
    }

    out << "\n## Per-difficulty test AUC (%)\n\n";
    out << "| Arm | Stage | Very easy | Easy | Hard | Very hard |\n";
    out << "|---|---|---|---|---|---|\n";
    for (const auto& ar : rep.arms) {
        for (const auto& sr : ar.stages) {
            out << "| " << ar.spec.name << " | " << sr.stage << " |";
            for (auto level : detail::kLevelOrder) {
                auto it = sr.per_level.find(level);
                out << " " << (it == sr.per_level.end() ? "" : detail::pct_pm(it->second))
                    << " |";
            }
            out << "\n";
        }
    }

    if (!rep.kappa_curves.empty()) {
        out << "\n## Model-vs-annotator kappa sweep\n\n";
        out << "| τ |";
        for (const auto& c : rep.kappa_curves)
            out << " " << c.arm << " (stage " << c.stage << ") |";
        out << "\n|---|";
        for (std::size_t i = 0; i < rep.kappa_curves.size(); ++i) out << "---|";
        out << "\n";
        for (std::size_t t = 0; t < rep.kappa_thresholds.size(); ++t) {
            out << "| " << detail::fmt("%.2f", rep.kappa_thresholds[t]) << " |";
            for (const auto& c : rep.kappa_curves)
                out << " " << detail::kappa_pm(c.summary[t]) << " |";
            out << "\n";
        }
    }
    if (!rep.annotator_reference.empty()) {
        out << "\n## Annotator reference kappa (mean pairwise)\n\n";
        out << "| Annotator | κ |\n|---|---|\n";
        for (std::size_t a = 0; a < rep.annotator_reference.size(); ++a)
            out << "| " << a << " | " << detail::kappa_pm(rep.annotator_reference[a]) << " |\n";
    }
    return out.str();
}

inline std::string sweep_report_csv(const RatioSweepReport& rep) {
    std::ostringstream out;
    out << "proxy,hard_ratio,n_seeds,auc_pct_mean,auc_pct_std\n";
    for (std::size_t p = 0; p < rep.proxies.size(); ++p)
        for (std::size_t r = 0; r < rep.ratios.size(); ++r)
            out << rep.proxies[p] << "," << detail::fmt("%.2f", rep.ratios[r]) << ","
                << rep.summary[p][r].n << "," << detail::fmt_pct(rep.summary[p][r].mean) << ","
                << detail::fmt_pct(rep.summary[p][r].std_dev) << "\n";
    out << "baseline,," << rep.baseline.n << "," << detail::fmt_pct(rep.baseline.mean) << ","
        << detail::fmt_pct(rep.baseline.std_dev) << "\n";
    return out.str();
}

inline std::string sweep_report_markdown(const RatioSweepReport& rep) {
    std::ostringstream out;
    out << "# Two-stage hard-ratio sweep\n\n";
    out << "- config hash: `" << rep.config_hash << "`\n";
    out << "- seeds: " << rep.seeds.size() << "\n";
    out << "- single-stage baseline AUC (%): " << detail::pct_pm(rep.baseline) << "\n";
    out << "\n| Hard ratio |";
    for (const auto& p : rep.proxies) out << " " << p << " |";
    out << "\n|---|";
    for (std::size_t i = 0; i < rep.proxies.size(); ++i) out << "---|";
    out << "\n";
    for (std::size_t r = 0; r < rep.ratios.size(); ++r) {
        out << "| " << detail::fmt("%.2f", rep.ratios[r]) << " |";
        for (std::size_t p = 0; p < rep.proxies.size(); ++p)
            out << " " << detail::pct_pm(rep.summary[p][r]) << " |";
        out << "\n";
    }
    return out.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << content;
    if (!out) throw IoError("failed writing " + path);
}

inline nlohmann::json load_report_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path + " for reading");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid report json: ") + e.what(), 1);
    }
    if (!j.contains("type")) throw SchemaError("report json lacks a type field");
    return j;
}

/// Writes the report in the requested format under out_dir; returns the
/// paths written. JSON is the lossless form the `report` command re-emits
/// from.
inline std::vector<std::string> emit_report(const nlohmann::json& report_json,
                                            ReportFormat format, const std::string& out_dir,
                                            const std::string& stem) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create directory " + out_dir + ": " + ec.message());
    const std::string base = out_dir + "/" + stem;
    const std::string type = report_json.at("type").get<std::string>();

    std::vector<std::string> written;
    if (format == ReportFormat::json) {
        write_text_file(base + ".json", report_json.dump(2) + "\n");
        written.push_back(base + ".json");
        return written;
    }
    if (type == "experiment") {
        const auto rep = experiment_report_from_json(report_json);
        if (format == ReportFormat::csv) {
            write_text_file(base + ".csv", experiment_report_csv(rep));
            written.push_back(base + ".csv");
            if (!rep.kappa_curves.empty() || !rep.annotator_reference.empty()) {
                write_text_file(base + "_kappa.csv", experiment_kappa_csv(rep));
                written.push_back(base + "_kappa.csv");
            }
        } else {
            write_text_file(base + ".md", experiment_report_markdown(rep));
            written.push_back(base + ".md");
        }
    } else if (type == "ratio_sweep") {
        const auto rep = sweep_report_from_json(report_json);
        if (format == ReportFormat::csv) {
            write_text_file(base + ".csv", sweep_report_csv(rep));
            written.push_back(base + ".csv");
        } else {
            write_text_file(base + ".md", sweep_report_markdown(rep));
            written.push_back(base + ".md");
        }
    } else {
        throw SchemaError("unknown report type '" + type + "'");
    }
    return written;
}

}  // namespace ccl
