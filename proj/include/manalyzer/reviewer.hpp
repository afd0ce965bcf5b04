#pragma once

// Hybrid review: per-paper independent scores, batched comparative scores,
// multiplicative fusion, threshold screening and screening metrics.

#include "manalyzer/gateway.hpp"
#include "manalyzer/log.hpp"
#include "manalyzer/prompts.hpp"
#include "manalyzer/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

namespace manalyzer::reviewer {

struct IndependentScores {
    int s1 = 1;  // topic relevance
    int s2 = 1;  // feasibility
    bool operator==(const IndependentScores&) const = default;
};

struct ReviewRecord {
    std::string doc_id;
    IndependentScores independent;
    double s_r = 0.0;
    double final_score = 0.0;
    bool kept = false;
    int batch_id = 0;
    bool operator==(const ReviewRecord&) const = default;
};

struct ScreeningMetrics {
    double accuracy = 0, precision = 0, recall = 0, f1 = 0;
    int tp = 0, fp = 0, tn = 0, fn = 0;
    bool degenerate = false;
};

// Raw (unclamped) pair. Labelled scores win; a reply without the labels
// falls back to its first two integers.
inline std::optional<std::pair<long long, long long>> parse_independent(std::string_view reply) {
    static const std::regex relevance(R"(topic\s*relevance[^0-9\-\n]{0,12}(-?\d+))", std::regex::icase);
    static const std::regex feasibility(R"(feasibility[^0-9\-\n]{0,12}(-?\d+))", std::regex::icase);
    static const std::regex integer(R"(-?\d+)");
    std::string s(reply);
    auto last = [&](const std::regex& re) -> std::optional<long long> {
        std::optional<long long> found;
        for (auto it = std::sregex_iterator(s.begin(), s.end(), re); it != std::sregex_iterator(); ++it)
            found = text::parse_int((*it)[1].str());
        return found;
    };
    auto r = last(relevance);
    auto f = last(feasibility);
    if (r && f) return std::pair{*r, *f};
    if (r || f) return std::nullopt;
    std::vector<long long> numbers;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), integer); it != std::sregex_iterator() && numbers.size() < 2;
         ++it)
        if (auto v = text::parse_int(it->str())) numbers.push_back(*v);
    if (numbers.size() < 2) return std::nullopt;
    return std::pair{numbers[0], numbers[1]};
}

inline int clamp_score(long long v) { return static_cast<int>(std::clamp<long long>(v, 1, 10)); }

struct PaperView {
    std::string doc_id;
    std::string title;
    std::string text;                   // packed text
    std::vector<std::string> captions;  // figure and table captions
};

inline std::string independent_body(const PaperView& paper) {
    std::string body = "Title: " + paper.title + "\n\n" + paper.text;
    if (!paper.captions.empty()) {
        body += "\n\nFigure and table captions:";
        for (const auto& c : paper.captions) body += "\n- " + c;
    }
    return body;
}

inline IndependentScores review_independent(gateway::Gateway& gw, const PaperView& paper, const std::string& direction,
                                            const std::string& field = "environmental science") {
    require(!text::trim(paper.text).empty() || !paper.captions.empty(), paper.doc_id + ": nothing to review");
    gateway::AgentRequest request;
    request.tag = gateway::Tag::independent_review;
    request.system_prompt = prompts::independent_review(field);
    request.user_parts = {gateway::Part::of_text("Research topic: " + direction),
                          gateway::Part::of_text(independent_body(paper))};
    for (int attempt = 1; attempt <= 2; ++attempt) {
        if (attempt > 1)
            request.user_parts.push_back(gateway::Part::of_text(prompts::reask(
                "End with the lines 'Topic Relevance: <1-10>' and 'Feasibility: <1-10>'.", attempt)));
        std::string reply;
        try {
            reply = gw.complete(request).raw_text;
        } catch (const Error& e) {
            if (e.code() != Errc::empty_response) throw;
        }
        auto parsed = parse_independent(reply);
        if (!parsed) continue;
        auto [r, f] = *parsed;
        bool in_range = r >= 1 && r <= 10 && f >= 1 && f <= 10;
        if (in_range || attempt == 2) {
            if (!in_range) log::warn(paper.doc_id + ": review scores out of range, clamped");
            return {clamp_score(r), clamp_score(f)};
        }
    }
    fail(Errc::review_failure, paper.doc_id + ": no parseable independent review after re-ask");
}

struct BatchEntry {
    std::string doc_id;
    std::string title;
    std::string excerpt;
};

inline std::string excerpt(const std::string& packed_text, size_t max_chars) {
    if (packed_text.size() <= max_chars) return packed_text;
    size_t cut = max_chars;
    while (cut > 0 && (static_cast<unsigned char>(packed_text[cut]) & 0xC0) == 0x80) --cut;  // utf-8 boundary
    return packed_text.substr(0, cut) + " ...";
}

inline std::string batch_body(const std::vector<BatchEntry>& batch) {
    std::string body;
    for (size_t i = 0; i < batch.size(); ++i) {
        if (i) body += "\n\n";
        body += "Paper " + std::to_string(i + 1) + ": " + batch[i].title + "\n" + batch[i].excerpt;
    }
    return body;
}

inline std::vector<double> review_batch(gateway::Gateway& gw, const std::vector<BatchEntry>& batch,
                                        const std::string& direction, int batch_size = 20,
                                        const std::string& field = "environmental science") {
    require(!batch.empty() && static_cast<int>(batch.size()) <= batch_size,
            "batch must hold between 1 and " + std::to_string(batch_size) + " papers");
    gateway::AgentRequest request;
    request.tag = gateway::Tag::comparative_review;
    request.system_prompt = prompts::comparative_review(field);
    request.user_parts = {gateway::Part::of_text("Research topic: " + direction),
                          gateway::Part::of_text(batch_body(batch))};
    Errc last = Errc::unparseable_list;
    std::string detail;
    for (int attempt = 1; attempt <= 2; ++attempt) {
        if (attempt > 1)
            request.user_parts.push_back(gateway::Part::of_text(prompts::reask(
                "Reply with exactly " + std::to_string(batch.size()) + " numbers between 0 and 1 as a list.",
                attempt)));
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
    fail(last, "comparative review of batch starting at " + batch.front().doc_id + ": " + detail);
}

inline double fuse(int s1, int s2, double s_r) { return s_r * static_cast<double>(s1 + s2); }

inline std::vector<std::string> screen(const std::vector<ReviewRecord>& records, double threshold) {
    std::vector<std::string> kept;
    for (const auto& r : records)
        if (r.final_score >= threshold) kept.push_back(r.doc_id);
    std::sort(kept.begin(), kept.end());
    return kept;
}

inline bool baseline_screen(int s1, int s2) { return static_cast<double>(s1 + s2) / 2.0 > 6.0; }

inline std::vector<std::vector<std::string>> make_batches(std::vector<std::string> doc_ids, int batch_size) {
    require(batch_size >= 1, "batch size must be positive");
    std::sort(doc_ids.begin(), doc_ids.end());
    std::vector<std::vector<std::string>> out;
    for (size_t i = 0; i < doc_ids.size(); i += static_cast<size_t>(batch_size))
        out.emplace_back(doc_ids.begin() + static_cast<long>(i),
                         doc_ids.begin() + static_cast<long>(std::min(doc_ids.size(), i + static_cast<size_t>(batch_size))));
    return out;
}

inline ScreeningMetrics classification_metrics(const std::set<std::string>& predicted, const std::set<std::string>& gold,
                                               const std::set<std::string>& corpus) {
    for (const auto& id : predicted) require(corpus.count(id), "predicted id not in corpus: " + id);
    for (const auto& id : gold) require(corpus.count(id), "gold id not in corpus: " + id);
    ScreeningMetrics m;
    for (const auto& id : corpus) {
        bool p = predicted.count(id) > 0, g = gold.count(id) > 0;
        if (p && g) ++m.tp;
        else if (p) ++m.fp;
        else if (g) ++m.fn;
        else ++m.tn;
    }
    const double n = static_cast<double>(corpus.size());
    m.accuracy = n > 0 ? (m.tp + m.tn) / n : 0.0;
    if (m.tp + m.fp > 0) m.precision = static_cast<double>(m.tp) / (m.tp + m.fp);
    else m.degenerate = true;
    if (m.tp + m.fn > 0) m.recall = static_cast<double>(m.tp) / (m.tp + m.fn);
    else m.degenerate = true;
    if (m.precision + m.recall > 0) m.f1 = 2 * m.precision * m.recall / (m.precision + m.recall);
    return m;
}

// Lines of "doc_id 0|1" separated by tab, comma or spaces; '#' starts a comment.
inline std::map<std::string, bool> parse_gold_labels(std::string_view content) {
    std::map<std::string, bool> labels;
    int line_no = 0;
    for (const auto& raw : text::split_lines(content)) {
        ++line_no;
        auto line = text::trim(raw);
        if (line.empty() || line.front() == '#') continue;
        std::string normalized(line);
        std::replace(normalized.begin(), normalized.end(), ',', ' ');
        std::replace(normalized.begin(), normalized.end(), '\t', ' ');
        auto pieces = text::split(text::collapse_whitespace(normalized), ' ');
        if (pieces.size() == 2 && pieces[0] == "doc_id") continue;
        if (pieces.size() != 2 || (pieces[1] != "0" && pieces[1] != "1"))
            fail(Errc::schema_violation, "gold labels line " + std::to_string(line_no) + ": expected '<doc_id> 0|1'");
        labels[pieces[0]] = pieces[1] == "1";
    }
    return labels;
}

inline nlohmann::json to_json(const ReviewRecord& r) {
    return {{"doc_id", r.doc_id}, {"s1", r.independent.s1}, {"s2", r.independent.s2}, {"s_r", r.s_r},
            {"final", r.final_score}, {"kept", r.kept},       {"batch_id", r.batch_id}};
}

inline ReviewRecord record_from_json(const nlohmann::json& j) {
    try {
        ReviewRecord r;
        r.doc_id = j.at("doc_id").get<std::string>();
        r.independent = {j.at("s1").get<int>(), j.at("s2").get<int>()};
        r.s_r = j.at("s_r").get<double>();
        r.final_score = j.at("final").get<double>();
        r.kept = j.at("kept").get<bool>();
        r.batch_id = j.at("batch_id").get<int>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::schema_violation, std::string("review record: ") + e.what());
    }
}

inline nlohmann::json to_json(const ScreeningMetrics& m) {
    return {{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
            {"tp", m.tp},             {"fp", m.fp},               {"tn", m.tn},         {"fn", m.fn},
            {"degenerate", m.degenerate}};
}

}  // namespace manalyzer::reviewer
