#pragma once

// Markdown report assembly. Everything except the discussion paragraph is
// rendered from data, so equal inputs give byte-equal reports.

#include "manalyzer/analysis.hpp"
#include "manalyzer/gateway.hpp"
#include "manalyzer/log.hpp"
#include "manalyzer/prompts.hpp"

#include <fmt/format.h>

#include <cmath>
#include <string>
#include <vector>

namespace manalyzer::report {

struct StudySummary {
    std::string doc_id;
    std::string title;
    std::string doi;
    size_t rows = 0;
    size_t values = 0;
    size_t provenance = 0;
    int iterations = 0;
    bool accepted = false;
};

struct ReportInput {
    std::string topic;
    size_t collected = 0;
    size_t unreviewable = 0;
    size_t screened_in = 0;
    double threshold = 8.0;
    std::vector<std::string> template_columns;
    std::vector<StudySummary> studies;  // screened-in papers, accepted or not
    analysis::MergedTable merged;
    std::vector<analysis::Result> results;
    std::string discussion;
};

inline std::string fmt_stat(double v) { return fmt::format("{:.4g}", v == 0.0 ? 0.0 : v); }

// Agent prose must not open new sections of the report.
inline std::string neutralize_headings(const std::string& prose) {
    std::string out;
    for (const auto& line : text::split_lines(prose)) {
        std::string_view l = line;
        auto t = text::trim(l);
        if (!t.empty() && t.front() == '#') {
            while (!t.empty() && t.front() == '#') t.remove_prefix(1);
            t = text::trim(t);
            if (!t.empty()) {
                out += "**" + std::string(t) + "**\n";
                continue;
            }
            out += "\n";
            continue;
        }
        out += line + "\n";
    }
    while (!out.empty() && (out.back() == '\n' || out.back() == ' ')) out.pop_back();
    return out;
}

inline std::string result_line(const analysis::Result& r) {
    const auto& s = r.stats;
    switch (r.spec.kind) {
        case analysis::Kind::clustering: {
            std::vector<std::string> sizes;
            for (const auto& v : s["sizes"]) sizes.push_back(std::to_string(v.get<size_t>()));
            return fmt::format("k-means with k = {} on {}: cluster sizes {} after {} iterations.", r.spec.k,
                               text::join(r.spec.features, ", "), text::join(sizes, ", "),
                               s["iterations"].get<int>());
        }
        case analysis::Kind::classification:
            return fmt::format("1-nearest-neighbour prediction of {} from {}: leave-one-out accuracy {} ({} of {}).",
                               r.spec.label, text::join(r.spec.features, ", "), fmt_stat(s["accuracy"].get<double>()),
                               s["correct"].get<size_t>(), r.used_rows);
        case analysis::Kind::regression:
            return fmt::format("Least squares {} = {} + {} x {}: R² = {} over {} rows.", r.spec.response,
                               fmt_stat(s["intercept"].get<double>()), fmt_stat(s["slope"].get<double>()),
                               r.spec.features.empty() ? std::string("row index") : r.spec.features[0],
                               fmt_stat(s["r2"].get<double>()), r.used_rows);
    }
    return {};
}

inline std::string data_summary(const analysis::MergedTable& merged) {
    std::string out;
    for (size_t c = 0; c < merged.columns.size(); ++c) {
        std::vector<double> v;
        for (const auto& row : merged.rows)
            if (row.cells[c]) v.push_back(*row.cells[c]);
        std::string n = std::to_string(v.size());
        if (v.empty()) {
            out += "| " + merged.columns[c] + " | 0 | - | - | - | - |\n";
            continue;
        }
        double mean = 0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double ss = 0;
        for (double x : v) ss += (x - mean) * (x - mean);
        std::string sd = v.size() > 1 ? fmt_stat(std::sqrt(ss / static_cast<double>(v.size() - 1))) : "-";
        auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        out += "| " + merged.columns[c] + " | " + n + " | " + fmt_stat(mean) + " | " + sd + " | " + fmt_stat(*lo) +
               " | " + fmt_stat(*hi) + " |\n";
    }
    return out;
}

inline std::string render_report(const ReportInput& in) {
    std::string out = "# Meta-Analysis Report: " + in.topic + "\n\n";
    size_t accepted = 0;
    for (const auto& s : in.studies) accepted += s.accepted;

    out += "## Methods\n\n";
    out += fmt::format(
        "{} papers were collected for the research direction \"{}\". {} could not be reviewed. Each remaining paper "
        "received independent relevance and feasibility scores and a comparative score within its batch; papers "
        "whose fused score reached {} were screened in ({} papers). Values for the template columns ({}) were "
        "extracted from text, tables and figures, checked against their cited sources and revised under checker "
        "feedback; {} tables were accepted and merged into {} rows. The analysis plan ran k-means clustering, "
        "nearest-neighbour classification and least-squares regression with a fixed seed.\n\n",
        in.collected, in.topic, in.unreviewable, fmt_stat(in.threshold), in.screened_in,
        text::join(in.template_columns, ", "), accepted, in.merged.row_count());

    out += "## Results\n\n";
    if (in.merged.rows.empty()) {
        out += "No usable studies: no accepted table contributed data, so no analysis was run.\n\n";
    }
    if (!in.studies.empty()) {
        out += "| Study | Title | Rows | Values | Provenance entries | Checker iterations | Accepted |\n";
        out += "|---|---|---|---|---|---|---|\n";
        for (const auto& s : in.studies)
            out += "| " + s.doc_id + " | " + markdown::escape_cell(s.title) + " | " + std::to_string(s.rows) + " | " +
                   std::to_string(s.values) + " | " + std::to_string(s.provenance) + " | " +
                   std::to_string(s.iterations) + " | " + (s.accepted ? "yes" : "no") + " |\n";
        out += "\n";
    }
    if (!in.merged.rows.empty()) {
        out += fmt::format("The merged table holds {} rows with {} missing cells.\n\n", in.merged.row_count(),
                           in.merged.missing_count);
        out += "| Column | N | Mean | SD | Min | Max |\n|---|---|---|---|---|---|\n";
        out += data_summary(in.merged) + "\n";
    }
    size_t figure = 0;
    for (const auto& r : in.results) {
        out += "### Step " + std::to_string(r.step) + ": " + std::string(analysis::to_string(r.spec.kind)) + "\n\n";
        if (r.skipped) {
            out += "Skipped (degenerate step): " + r.reason + ".\n\n";
            continue;
        }
        out += result_line(r) + " " + std::to_string(r.excluded_rows) + " rows with missing values were excluded.\n\n";
        out += "![Figure " + std::to_string(++figure) + ": " + r.spec.title + "](analysis/" + r.stem() + ".tsv)\n\n";
    }
    out += "Heterogeneity (I²) is unavailable: the extracted values carry no per-study variances.\n\n";

    out += "## Discussion\n\n";
    auto discussion = neutralize_headings(in.discussion);
    out += (discussion.empty() ? std::string("No interpretation was produced.") : discussion) + "\n\n";

    out += "## References\n\n";
    if (in.studies.empty()) out += "None.\n";
    for (size_t i = 0; i < in.studies.size(); ++i) {
        const auto& s = in.studies[i];
        out += std::to_string(i + 1) + ". " + s.title + (s.doi.empty() ? "" : ". doi:" + s.doi) + " (" + s.doc_id + ")\n";
    }
    return out;
}

inline std::string results_summary(const ReportInput& in) {
    std::string out = "Merged rows: " + std::to_string(in.merged.row_count()) + "\n";
    if (!in.merged.rows.empty())
        out += "| Column | N | Mean | SD | Min | Max |\n|---|---|---|---|---|---|\n" + data_summary(in.merged);
    for (const auto& r : in.results)
        out += "\nStep " + std::to_string(r.step) + ": " + (r.skipped ? "skipped, " + r.reason : result_line(r));
    return out;
}

// One reporter call with a single re-ask on an empty reply.
inline std::string write_discussion(gateway::Gateway& gw, const ReportInput& in,
                                    const std::string& field = "environmental science") {
    gateway::AgentRequest request;
    request.tag = gateway::Tag::report;
    request.system_prompt = prompts::reporter(field);
    request.user_parts = {gateway::Part::of_text("Research topic: " + in.topic),
                          gateway::Part::of_text(results_summary(in))};
    for (int attempt = 1; attempt <= 2; ++attempt) {
        if (attempt > 1)
            request.user_parts.push_back(gateway::Part::of_text(prompts::reask("Write the interpretation paragraph.", attempt)));
        try {
            auto reply = gw.complete(request).raw_text;
            if (!text::trim(reply).empty()) return reply;
        } catch (const Error& e) {
            if (e.code() != Errc::empty_response) throw;
        }
    }
    log::warn("reporter gave no interpretation");
    return {};
}

}  // namespace manalyzer::report
