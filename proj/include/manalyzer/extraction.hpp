#pragma once

// Two-stage extraction: convert visuals to text parts, mask irrelevant parts,
// extract one integrated table whose numbers cite their origin, validate the
// citations and iterate with a checker agent.

#include "manalyzer/document.hpp"
#include "manalyzer/gateway.hpp"
#include "manalyzer/log.hpp"
#include "manalyzer/markdown_table.hpp"
#include "manalyzer/numeric.hpp"
#include "manalyzer/prompts.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <optional>
#include <regex>
#include <string>
#include <vector>

namespace manalyzer::extraction {

enum class Origin { paragraph, table_image, figure_image };

inline std::string_view to_string(Origin o) {
    switch (o) {
        case Origin::paragraph: return "text-paragraph";
        case Origin::table_image: return "table-image";
        case Origin::figure_image: return "figure-image";
    }
    return "text-paragraph";
}

inline Origin origin_from_string(std::string_view s) {
    if (s == "table-image") return Origin::table_image;
    if (s == "figure-image") return Origin::figure_image;
    if (s == "text-paragraph") return Origin::paragraph;
    fail(Errc::schema_violation, "unknown part origin '" + std::string(s) + "'");
}

struct ConvertedPart {
    std::string part_id;
    Origin origin = Origin::paragraph;
    std::string body;
    std::string title;
    std::string footnote;
    markdown::Table grid;  // parsed body for table-image parts
    bool operator==(const ConvertedPart&) const = default;
};

struct ProvenanceEntry {
    double value = 0;
    std::string part_id;
    int row = 0;     // 0 when the citation gives no row
    int column = 0;  // 0 when the citation gives no column
    std::string note;
    bool operator==(const ProvenanceEntry&) const = default;
};

struct ExtractedTable {
    std::string doc_id;
    std::vector<std::string> header;
    std::vector<std::vector<numeric::Cell>> rows;
    std::vector<ProvenanceEntry> provenance;
    int iteration = 1;
    bool operator==(const ExtractedTable&) const = default;

    size_t value_count() const {
        size_t n = 0;
        for (const auto& r : rows)
            for (const auto& c : r) n += c.has_value();
        return n;
    }
    std::vector<double> values() const {
        std::vector<double> out;
        for (const auto& r : rows)
            for (const auto& c : r)
                if (c) out.push_back(*c);
        return out;
    }
};

struct CheckReport {
    int data_accuracy = 1;
    int semantic_consistency = 1;
    int data_completeness = 1;
    int overall = 1;
    std::string suggestion;
    bool operator==(const CheckReport&) const = default;
};

enum class ViolationKind { unknown_part, missing_cell_address, out_of_range, non_numeric_cell, value_mismatch, unproven_cell };

inline std::string_view to_string(ViolationKind k) {
    switch (k) {
        case ViolationKind::unknown_part: return "unknown-part";
        case ViolationKind::missing_cell_address: return "missing-cell-address";
        case ViolationKind::out_of_range: return "out-of-range";
        case ViolationKind::non_numeric_cell: return "non-numeric-cell";
        case ViolationKind::value_mismatch: return "value-mismatch";
        case ViolationKind::unproven_cell: return "unproven-cell";
    }
    return "unknown";
}

struct Violation {
    ViolationKind kind;
    int entry = -1;  // provenance index, -1 for table-cell violations
    std::string message;
};

struct Tolerance {
    double abs = 1e-9;
    double rel = 1e-4;
};

// ---------------------------------------------------------------- conversion

inline ConvertedPart paragraph_part(const Paragraph& p) {
    return {"P" + std::to_string(p.index), Origin::paragraph, p.text, "", "", {}};
}

inline std::string footnote_from_header(const std::vector<std::string>& header) {
    std::string out;
    for (const auto& h : header) out += h + ": column as labelled.\n";
    return std::string(text::trim(out));
}

// Tables in the reply paired with the title/footnote blocks in order.
inline std::vector<ConvertedPart> parse_conversion(std::string_view reply, const Visual& visual) {
    auto tables = markdown::parse_tables(reply);
    auto titles = markdown::delimited_blocks(reply, "Title");
    auto footnotes = markdown::delimited_blocks(reply, "Footnote");
    std::vector<ConvertedPart> parts;
    for (size_t i = 0; i < tables.size(); ++i) {
        ConvertedPart part;
        part.part_id = tables.size() == 1 ? visual.id : visual.id + "-" + std::to_string(i + 1);
        part.origin = Origin::table_image;
        part.grid = tables[i];
        part.body = markdown::render(tables[i]);
        part.title = i < titles.size() && !titles[i].empty() ? titles[i] : visual.caption;
        if (part.title.empty()) part.title = visual.id;
        part.footnote = i < footnotes.size() && !footnotes[i].empty() ? footnotes[i] : footnote_from_header(tables[i].header);
        parts.push_back(std::move(part));
    }
    return parts;
}

inline std::vector<ConvertedPart> convert_table_image(gateway::Gateway& gw, const Visual& visual,
                                                      const std::filesystem::path& workspace_root,
                                                      const std::string& field) {
    auto path = workspace_root / visual.image;
    require(std::filesystem::is_regular_file(path), visual.id + ": image file missing: " + path.string());
    gateway::AgentRequest request;
    request.kind = gateway::Kind::vision;
    request.tag = gateway::Tag::table_convert;
    request.system_prompt = prompts::table_conversion(field);
    request.user_parts = {gateway::Part::of_image(path, visual.caption)};
    bool saw_reply = false;
    for (int attempt = 1; attempt <= 2; ++attempt) {
        if (attempt > 1)
            request.user_parts.push_back(gateway::Part::of_text(
                prompts::reask("Convert the table into a markdown pipe table with title and footnote blocks.", attempt)));
        try {
            auto parts = parse_conversion(gw.complete(request).raw_text, visual);
            saw_reply = true;
            if (!parts.empty()) return parts;
        } catch (const Error& e) {
            if (e.code() != Errc::empty_response) throw;
        }
    }
    if (saw_reply) fail(Errc::no_table_found, visual.id + ": reply holds no markdown table");
    fail(Errc::conversion_failure, visual.id + ": no usable conversion after re-ask");
}

inline std::vector<std::string> bullet_lines(std::string_view reply) {
    std::vector<std::string> bullets;
    for (const auto& line : text::split_lines(reply)) {
        auto t = text::trim(line);
        if (t.size() >= 2 && (t.substr(0, 2) == "- " || t.substr(0, 2) == "* "))
            bullets.emplace_back("- " + std::string(text::trim(t.substr(2))));
        else if (t.substr(0, 3) == "•")
            bullets.emplace_back("- " + std::string(text::trim(t.substr(3))));
    }
    return bullets;
}

inline ConvertedPart summarize_figure(gateway::Gateway& gw, const Visual& visual,
                                      const std::filesystem::path& workspace_root, const std::string& field) {
    auto path = workspace_root / visual.image;
    require(std::filesystem::is_regular_file(path), visual.id + ": image file missing: " + path.string());
    gateway::AgentRequest request;
    request.kind = gateway::Kind::vision;
    request.tag = gateway::Tag::figure_summary;
    request.system_prompt = prompts::figure_summary(field);
    request.user_parts = {gateway::Part::of_image(path, visual.caption)};
    for (int attempt = 1; attempt <= 2; ++attempt) {
        if (attempt > 1)
            request.user_parts.push_back(gateway::Part::of_text(
                prompts::reask("Reply with a markdown bullet list ('- ' per line) of the figure's key values.", attempt)));
        try {
            auto bullets = bullet_lines(gw.complete(request).raw_text);
            if (!bullets.empty()) return {visual.id, Origin::figure_image, text::join(bullets, "\n"), visual.caption, "", {}};
        } catch (const Error& e) {
            if (e.code() != Errc::empty_response) throw;
        }
    }
    fail(Errc::summary_failure, visual.id + ": no bullet summary after re-ask");
}

struct Conversion {
    std::vector<ConvertedPart> parts;
    std::vector<std::string> skipped;  // "<id>: <reason>" for visuals that could not be converted
};

// Paragraphs, then tables, then figures. A visual that fails conversion is
// skipped with a warning; provider and transport errors propagate.
inline Conversion convert_document(gateway::Gateway& gw, const ParsedDocument& doc,
                                   const std::filesystem::path& workspace_root, const std::string& field) {
    Conversion out;
    for (const auto& p : doc.paragraphs) out.parts.push_back(paragraph_part(p));
    auto skip = [&](const Visual& v, const Error& e) {
        out.skipped.push_back(v.id + ": " + e.what());
        log::warn(doc.meta.doc_id + ": skipping " + v.id + " (" + e.what() + ")");
    };
    for (const auto& t : doc.tables) {
        try {
            for (auto& part : convert_table_image(gw, t, workspace_root, field)) out.parts.push_back(std::move(part));
        } catch (const Error& e) {
            if (e.code() != Errc::no_table_found && e.code() != Errc::conversion_failure) throw;
            skip(t, e);
        }
    }
    for (const auto& f : doc.figures) {
        try {
            out.parts.push_back(summarize_figure(gw, f, workspace_root, field));
        } catch (const Error& e) {
            if (e.code() != Errc::summary_failure) throw;
            skip(f, e);
        }
    }
    return out;
}

// ------------------------------------------------------------------- masking

inline std::string render_part(const ConvertedPart& part, size_t ordinal) {
    std::string out = "Part " + std::to_string(ordinal) + " (" + part.part_id + ", " + std::string(to_string(part.origin)) + ")\n";
    if (!part.title.empty()) out += "Title: " + part.title + "\n";
    out += part.body;
    if (!part.footnote.empty()) out += "\nFootnote:\n" + part.footnote;
    return out;
}

inline std::string render_parts(const std::vector<ConvertedPart>& parts) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += "\n\n";
        out += render_part(parts[i], i + 1);
    }
    return out;
}

inline std::vector<double> relevance_mask(gateway::Gateway& gw, const std::vector<ConvertedPart>& batch,
                                          const std::string& topic, const std::string& field) {
    require(!batch.empty(), "mask batch is empty");
    gateway::AgentRequest request;
    request.tag = gateway::Tag::mask;
    request.system_prompt = prompts::relevance_mask(field);
    request.user_parts = {gateway::Part::of_text("Research topic: " + topic), gateway::Part::of_text(render_parts(batch))};
    Errc last = Errc::unparseable_list;
    std::string detail;
    for (int attempt = 1; attempt <= 2; ++attempt) {
        if (attempt > 1)
            request.user_parts.push_back(gateway::Part::of_text(prompts::reask(
                "Reply with exactly " + std::to_string(batch.size()) + " scores between 0 and 1 as a list.", attempt)));
        auto values = text::parse_number_list(gw.complete(request).raw_text);
        if (!values) {
            last = Errc::unparseable_list;
            detail = "reply is not a numeric list";
            continue;
        }
        if (values->size() != batch.size()) {
            last = Errc::length_mismatch;
            detail = "expected " + std::to_string(batch.size()) + " scores, got " + std::to_string(values->size());
            continue;
        }
        for (auto& v : *values) v = std::clamp(v, 0.0, 1.0);
        return *values;
    }
    fail(last, "relevance mask starting at " + batch.front().part_id + ": " + detail);
}

// One score per part, in part order, requested in consecutive batches.
inline std::vector<double> mask_parts(gateway::Gateway& gw, const std::vector<ConvertedPart>& parts,
                                      const std::string& topic, int batch_size, const std::string& field) {
    require(batch_size >= 1, "mask batch size must be positive");
    std::vector<double> scores;
    for (size_t i = 0; i < parts.size(); i += static_cast<size_t>(batch_size)) {
        std::vector<ConvertedPart> batch(parts.begin() + static_cast<long>(i),
                                         parts.begin() + static_cast<long>(std::min(parts.size(), i + static_cast<size_t>(batch_size))));
        auto s = relevance_mask(gw, batch, topic, field);
        scores.insert(scores.end(), s.begin(), s.end());
    }
    return scores;
}

inline std::vector<ConvertedPart> retained(const std::vector<ConvertedPart>& parts, const std::vector<double>& scores) {
    require(parts.size() == scores.size(), "mask length differs from part count");
    std::vector<ConvertedPart> out;
    for (size_t i = 0; i < parts.size(); ++i)
        if (scores[i] > 0.5) out.push_back(parts[i]);
    return out;
}

// ---------------------------------------------------------------- extraction

inline std::vector<std::string> parse_template(std::string_view content) {
    std::vector<std::string> columns;
    for (const auto& line : text::split_lines(content)) {
        auto t = text::trim(line);
        if (t.empty() || t.front() == '#') continue;
        columns.emplace_back(t);
    }
    require(!columns.empty(), "extraction template has no columns");
    return columns;
}

inline std::string header_key(std::string_view h) { return text::lower(text::collapse_whitespace(h)); }

// "The number X: Comes from <Type> <ref>, Row i, Column j." Type, row and
// column are optional. The ref is a 1-based ordinal of the parts shown to the
// agent or a literal part id.
inline std::optional<ProvenanceEntry> parse_provenance_line(std::string_view line,
                                                            const std::vector<ConvertedPart>& parts) {
    static const std::regex pattern(
        R"(the\s+number\s+(.+?)\s*:\s*comes\s+from\s+(?:(?:the\s+)?(?:part|table|paragraph|figure|image|text)\s+)?([A-Za-z0-9_.\-]+?)\s*(?:,\s*row\s+(\d+))?\s*(?:,\s*column\s+(\d+))?\s*[.;]?\s*$)",
        std::regex::icase);
    std::string s(text::trim(line));
    std::smatch m;
    if (!std::regex_search(s, m, pattern)) return std::nullopt;
    auto value = numeric::try_normalize(m[1].str());
    if (!value || !*value) return std::nullopt;
    ProvenanceEntry entry;
    entry.value = **value;
    entry.note = s;
    std::string ref = m[2].str();
    entry.part_id = ref;
    if (auto ordinal = text::parse_int(ref); ordinal && *ordinal >= 1 && static_cast<size_t>(*ordinal) <= parts.size())
        entry.part_id = parts[static_cast<size_t>(*ordinal - 1)].part_id;
    if (m[3].matched) entry.row = static_cast<int>(*text::parse_int(m[3].str()));
    if (m[4].matched) entry.column = static_cast<int>(*text::parse_int(m[4].str()));
    return entry;
}

inline std::string extraction_template_line(const std::vector<std::string>& columns) {
    std::string line = "|";
    for (const auto& c : columns) line += " " + c + " |";
    return line;
}

// Parses one extraction reply against the template.
inline ExtractedTable parse_extraction(std::string_view reply, const std::vector<std::string>& columns,
                                       const std::vector<ConvertedPart>& parts) {
    auto tables = markdown::parse_tables(reply);
    if (tables.empty()) fail(Errc::unparseable_table, "reply holds no markdown table");
    const auto& t = tables.front();
    bool same = t.header.size() == columns.size();
    for (size_t i = 0; same && i < columns.size(); ++i) same = header_key(t.header[i]) == header_key(columns[i]);
    if (!same)
        fail(Errc::header_mismatch, "table header '" + text::join(t.header, " | ") + "' does not match the template '" +
                                        text::join(columns, " | ") + "'");
    ExtractedTable out;
    out.header = columns;
    for (size_t r = 0; r < t.rows.size(); ++r) {
        if (t.rows[r].size() != columns.size())
            fail(Errc::unparseable_table, "row " + std::to_string(r + 1) + " has " + std::to_string(t.rows[r].size()) +
                                              " cells, expected " + std::to_string(columns.size()));
        std::vector<numeric::Cell> row;
        for (const auto& cell : t.rows[r]) row.push_back(numeric::normalize_numeric(cell));
        out.rows.push_back(std::move(row));
    }
    auto blocks = markdown::delimited_blocks(reply, "Explanation");
    if (blocks.empty()) {
        if (out.value_count() > 0) fail(Errc::missing_explanation_block, "reply has no explanation block");
        return out;
    }
    for (const auto& block : blocks)
        for (const auto& line : text::split_lines(block))
            if (auto entry = parse_provenance_line(line, parts)) out.provenance.push_back(std::move(*entry));
    return out;
}

inline gateway::AgentRequest extraction_request(const std::vector<ConvertedPart>& parts,
                                                const std::vector<std::string>& columns, const std::string& topic,
                                                const std::string& feedback, int attempt, const std::string& field) {
    gateway::AgentRequest request;
    request.tag = gateway::Tag::extract;
    request.system_prompt = prompts::extraction(field);
    request.user_parts = {gateway::Part::of_text("Research topic: " + topic),
                          gateway::Part::of_text("Template:\n" + extraction_template_line(columns)),
                          gateway::Part::of_text(render_parts(parts))};
    if (!feedback.empty())
        request.user_parts.push_back(gateway::Part::of_text("Feedback on your previous table (attempt " +
                                                            std::to_string(attempt) + " follows):\n" + feedback));
    return request;
}

inline ExtractedTable extract_to_table(gateway::Gateway& gw, const std::vector<ConvertedPart>& parts,
                                       const std::vector<std::string>& columns, const std::string& topic,
                                       const std::string& feedback = "", int attempt = 1,
                                       const std::string& field = "environmental science") {
    require(!columns.empty(), "extraction template has no columns");
    auto reply = gw.complete(extraction_request(parts, columns, topic, feedback, attempt, field)).raw_text;
    auto table = parse_extraction(reply, columns, parts);
    table.iteration = attempt;
    return table;
}

// ---------------------------------------------------------------- validation

inline std::vector<Violation> validate_provenance(const ExtractedTable& t, const std::vector<ConvertedPart>& parts,
                                                  Tolerance tol = {}) {
    std::vector<Violation> out;
    auto find_part = [&](const std::string& id) -> const ConvertedPart* {
        for (const auto& p : parts)
            if (p.part_id == id) return &p;
        return nullptr;
    };
    for (size_t i = 0; i < t.provenance.size(); ++i) {
        const auto& e = t.provenance[i];
        const int idx = static_cast<int>(i);
        const std::string who = "entry " + std::to_string(i + 1) + " (" + numeric::render(e.value) + " from " + e.part_id + ")";
        const auto* part = find_part(e.part_id);
        if (!part) {
            out.push_back({ViolationKind::unknown_part, idx, who + ": no retained part with that reference"});
            continue;
        }
        if (part->origin == Origin::table_image) {
            if (e.row < 1 || e.column < 1) {
                out.push_back({ViolationKind::missing_cell_address, idx, who + ": table citation needs Row and Column"});
                continue;
            }
            const auto& grid = part->grid;
            if (static_cast<size_t>(e.row) > grid.rows.size() ||
                static_cast<size_t>(e.column) > grid.rows[static_cast<size_t>(e.row - 1)].size()) {
                out.push_back({ViolationKind::out_of_range, idx,
                               who + ": Row " + std::to_string(e.row) + ", Column " + std::to_string(e.column) +
                                   " is outside a " + std::to_string(grid.rows.size()) + "x" +
                                   std::to_string(grid.header.size()) + " table"});
                continue;
            }
            const auto& cell = grid.rows[static_cast<size_t>(e.row - 1)][static_cast<size_t>(e.column - 1)];
            auto cited = numeric::try_normalize(cell);
            if (!cited || !*cited) {
                out.push_back({ViolationKind::non_numeric_cell, idx, who + ": cited cell '" + cell + "' holds no number"});
                continue;
            }
            if (!numeric::within_tolerance(e.value, **cited, tol.abs, tol.rel))
                out.push_back({ViolationKind::value_mismatch, idx, who + ": cited cell holds " + cell});
        } else {
            bool found = false;
            for (double v : numeric::number_tokens(part->body + "\n" + part->title))
                found = found || numeric::within_tolerance(e.value, v, tol.abs, tol.rel);
            if (!found) out.push_back({ViolationKind::value_mismatch, idx, who + ": value does not occur in the part"});
        }
    }
    for (size_t r = 0; r < t.rows.size(); ++r)
        for (size_t c = 0; c < t.rows[r].size(); ++c) {
            if (!t.rows[r][c]) continue;
            double v = *t.rows[r][c];
            bool proven = std::any_of(t.provenance.begin(), t.provenance.end(), [&](const ProvenanceEntry& e) {
                return numeric::within_tolerance(v, e.value, tol.abs, tol.rel);
            });
            if (!proven)
                out.push_back({ViolationKind::unproven_cell, -1,
                               "Row " + std::to_string(r + 1) + ", Column " + std::to_string(c + 1) + " (" +
                                   numeric::render(v) + ") has no provenance entry"});
        }
    return out;
}

// ------------------------------------------------------------------- checker

inline std::optional<CheckReport> parse_check_report(std::string_view reply) {
    auto score = [&](const char* name) -> std::optional<int> {
        std::regex re(std::string(R"(['"]?)") + name + R"(['"]?\s*:\s*['"]?(-?\d+))", std::regex::icase);
        std::string s(reply);
        std::smatch m;
        if (!std::regex_search(s, m, re)) return std::nullopt;
        auto v = text::parse_int(m[1].str());
        if (!v) return std::nullopt;
        return static_cast<int>(std::clamp<long long>(*v, 1, 10));
    };
    CheckReport report;
    auto a = score("Data Accuracy"), b = score("Semantic Consistency"), c = score("Data Completeness"),
         o = score("Overall Score");
    static const std::regex suggestion(R"(['"]?Suggestion['"]?\s*:\s*)", std::regex::icase);
    std::string s(reply);
    std::smatch m;
    if (!a || !b || !c || !o || !std::regex_search(s, m, suggestion)) return std::nullopt;
    std::string rest(text::trim(std::string_view(s).substr(static_cast<size_t>(m.position(0) + m.length(0)))));
    while (!rest.empty() && (rest.back() == '}' || rest.back() == ',' || text::is_space(rest.back()))) rest.pop_back();
    if (rest.size() >= 2 && (rest.front() == '"' || rest.front() == '\'') && rest.back() == rest.front())
        rest = rest.substr(1, rest.size() - 2);
    report = {*a, *b, *c, *o, rest};
    return report;
}

inline std::string render_table(const ExtractedTable& t) {
    markdown::Table m;
    m.header = t.header;
    for (const auto& row : t.rows) {
        std::vector<std::string> cells;
        for (const auto& c : row) cells.push_back(numeric::render(c));
        m.rows.push_back(std::move(cells));
    }
    return markdown::render(m);
}

inline CheckReport empty_submission_report() {
    return {1, 1, 1, 1, "You should extract the relevant values into the table; the submission is empty."};
}

inline CheckReport check_table(gateway::Gateway& gw, const ExtractedTable& t, const std::vector<ConvertedPart>& parts,
                               const std::string& topic, int attempt = 1,
                               const std::string& field = "environmental science") {
    if (t.value_count() == 0) return empty_submission_report();
    gateway::AgentRequest request;
    request.tag = gateway::Tag::check;
    request.system_prompt = prompts::checker(field);
    request.user_parts = {gateway::Part::of_text("Research topic: " + topic), gateway::Part::of_text(render_parts(parts)),
                          gateway::Part::of_text("Student table (attempt " + std::to_string(attempt) + "):\n" +
                                                 render_table(t))};
    for (int ask = 1; ask <= 2; ++ask) {
        if (ask > 1)
            request.user_parts.push_back(gateway::Part::of_text(prompts::reask(
                "Reply with the record holding 'Data Accuracy', 'Semantic Consistency', 'Data Completeness', "
                "'Overall Score' and 'Suggestion'.",
                ask)));
        std::string reply;
        try {
            reply = gw.complete(request).raw_text;
        } catch (const Error& e) {
            if (e.code() != Errc::empty_response) throw;
        }
        if (auto report = parse_check_report(reply)) return *report;
    }
    fail(Errc::checker_failure, "checker reply unparseable after re-ask");
}

// ------------------------------------------------------------- feedback loop

struct LoopOptions {
    int max_iter = 3;
    int accept_overall = 7;
    Tolerance tolerance;
    std::string field = "environmental science";
};

struct TraceEntry {
    int iteration = 1;
    std::optional<CheckReport> report;
    bool checker_failed = false;
    std::vector<Violation> violations;
    std::string error;  // extraction error of this attempt, empty when it produced a table
    bool accepted = false;
};

struct LoopResult {
    ExtractedTable table;
    std::vector<TraceEntry> trace;
    bool accepted = false;
};

inline std::string feedback_text(const TraceEntry& entry) {
    std::string out;
    if (!entry.error.empty()) return "Your previous reply could not be used: " + entry.error + ". Follow the required format exactly.";
    if (entry.report) out = "Checker suggestion: " + entry.report->suggestion;
    if (!entry.violations.empty()) {
        out += out.empty() ? "" : "\n";
        out += "Provenance problems:";
        for (const auto& v : entry.violations) out += "\n- " + std::string(to_string(v.kind)) + ": " + v.message;
    }
    return out;
}

inline LoopResult run_feedback_loop(gateway::Gateway& gw, const std::vector<ConvertedPart>& parts,
                                    const std::vector<std::string>& columns, const std::string& topic,
                                    const LoopOptions& options = {}) {
    require(options.max_iter >= 1 && options.max_iter <= 3, "max_iter must be within [1, 3]");
    LoopResult result;
    std::optional<ExtractedTable> best;
    int best_score = -1;
    size_t best_violations = 0;
    std::string feedback;
    for (int attempt = 1; attempt <= options.max_iter; ++attempt) {
        TraceEntry entry;
        entry.iteration = attempt;
        ExtractedTable table;
        try {
            table = extract_to_table(gw, parts, columns, topic, feedback, attempt, options.field);
        } catch (const Error& e) {
            bool extraction_error = e.code() == Errc::header_mismatch || e.code() == Errc::unparseable_table ||
                                    e.code() == Errc::missing_explanation_block ||
                                    e.code() == Errc::unparseable_numeric;
            if (!extraction_error || (attempt == options.max_iter && !best)) throw;
            entry.error = std::string(to_string(e.code())) + ": " + e.what();
            log::warn("extraction attempt " + std::to_string(attempt) + " failed: " + entry.error);
            result.trace.push_back(entry);
            feedback = feedback_text(entry);
            continue;
        }
        entry.violations = validate_provenance(table, parts, options.tolerance);
        int score = 0;
        try {
            entry.report = check_table(gw, table, parts, topic, attempt, options.field);
            score = entry.report->overall;
        } catch (const Error& e) {
            if (e.code() != Errc::checker_failure) throw;
            entry.checker_failed = true;
            score = options.accept_overall;
            log::warn("checker unusable on attempt " + std::to_string(attempt) + "; treating the check as passed");
        }
        entry.accepted = score >= options.accept_overall && entry.violations.empty();
        result.trace.push_back(entry);
        if (entry.accepted) {
            result.table = std::move(table);
            result.accepted = true;
            return result;
        }
        if (!best || score > best_score || (score == best_score && entry.violations.size() < best_violations)) {
            best = table;
            best_score = score;
            best_violations = entry.violations.size();
        }
        feedback = feedback_text(entry);
    }
    result.table = std::move(*best);
    return result;
}

// Result for a paper whose mask retained nothing: an empty table scored as an
// empty submission, without any agent call.
inline LoopResult empty_result(const std::vector<std::string>& columns) {
    LoopResult result;
    result.table.header = columns;
    TraceEntry entry;
    entry.report = empty_submission_report();
    result.trace.push_back(entry);
    return result;
}

// --------------------------------------------------------------- persistence

inline nlohmann::json to_json(const ConvertedPart& p) {
    nlohmann::json j = {{"part_id", p.part_id}, {"origin", to_string(p.origin)}, {"body", p.body},
                        {"title", p.title},     {"footnote", p.footnote}};
    return j;
}

inline ConvertedPart part_from_json(const nlohmann::json& j) {
    ConvertedPart p;
    p.part_id = j.at("part_id").get<std::string>();
    p.origin = origin_from_string(j.at("origin").get<std::string>());
    p.body = j.at("body").get<std::string>();
    p.title = j.value("title", "");
    p.footnote = j.value("footnote", "");
    if (p.origin == Origin::table_image) {
        auto tables = markdown::parse_tables(p.body);
        if (!tables.empty()) p.grid = tables.front();
    }
    return p;
}

inline nlohmann::json to_json(const ProvenanceEntry& e) {
    return {{"value", e.value}, {"part_id", e.part_id}, {"row", e.row}, {"column", e.column}, {"note", e.note}};
}

inline nlohmann::json to_json(const ExtractedTable& t) {
    auto rows = nlohmann::json::array();
    for (const auto& r : t.rows) {
        auto row = nlohmann::json::array();
        for (const auto& c : r) row.push_back(c ? nlohmann::json(*c) : nlohmann::json(nullptr));
        rows.push_back(row);
    }
    auto prov = nlohmann::json::array();
    for (const auto& e : t.provenance) prov.push_back(to_json(e));
    return {{"doc_id", t.doc_id}, {"header", t.header}, {"rows", rows}, {"provenance", prov}, {"iteration", t.iteration}};
}

inline ExtractedTable table_from_json(const nlohmann::json& j) {
    try {
        ExtractedTable t;
        t.doc_id = j.at("doc_id").get<std::string>();
        t.header = j.at("header").get<std::vector<std::string>>();
        for (const auto& r : j.at("rows")) {
            std::vector<numeric::Cell> row;
            for (const auto& c : r) row.push_back(c.is_null() ? numeric::Cell{} : numeric::Cell{c.get<double>()});
            t.rows.push_back(std::move(row));
        }
        for (const auto& e : j.at("provenance"))
            t.provenance.push_back({e.at("value").get<double>(), e.at("part_id").get<std::string>(),
                                    e.at("row").get<int>(), e.at("column").get<int>(), e.value("note", "")});
        t.iteration = j.value("iteration", 1);
        return t;
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::schema_violation, std::string("extracted table: ") + e.what());
    }
}

inline nlohmann::json to_json(const CheckReport& r) {
    return {{"data_accuracy", r.data_accuracy},
            {"semantic_consistency", r.semantic_consistency},
            {"data_completeness", r.data_completeness},
            {"overall", r.overall},
            {"suggestion", r.suggestion}};
}

inline nlohmann::json to_json(const TraceEntry& e) {
    auto violations = nlohmann::json::array();
    for (const auto& v : e.violations)
        violations.push_back({{"kind", to_string(v.kind)}, {"entry", v.entry}, {"message", v.message}});
    return {{"iteration", e.iteration},
            {"report", e.report ? to_json(*e.report) : nlohmann::json(nullptr)},
            {"checker_failed", e.checker_failed},
            {"violations", violations},
            {"error", e.error},
            {"accepted", e.accepted}};
}

}  // namespace manalyzer::extraction
