#pragma once

// Paragraph importance rating and exact 0/1 knapsack selection under a
// context budget.

#include "manalyzer/document.hpp"
#include "manalyzer/gateway.hpp"
#include "manalyzer/log.hpp"
#include "manalyzer/prompts.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

namespace manalyzer::packer {

inline constexpr int kMaxBudget = 131072;

struct RatedParagraph {
    int index = 0;
    int importance = 0;
    int weight = 1;
    bool operator==(const RatedParagraph&) const = default;
};

struct PackedDocument {
    std::string doc_id;
    std::vector<int> selected_indices;
    int total_weight = 0;
    int total_importance = 0;
    int budget = 0;          // paragraph budget after captions
    int caption_weight = 0;
    bool scored = false;     // false when everything fit and no agent was asked
    std::vector<RatedParagraph> ratings;
    bool operator==(const PackedDocument&) const = default;
};

inline int estimate_weight(std::string_view text) {
    return std::max<int>(1, static_cast<int>((text.size() + 3) / 4));
}

struct Selection {
    std::vector<int> indices;
    int total_weight = 0;
    int total_importance = 0;
};

// Exact optimum. Among equal importance the lighter subset wins, then the
// lexicographically smallest sorted index list.
inline Selection select_paragraphs(std::vector<RatedParagraph> items, int budget) {
    require(budget >= 0 && budget <= kMaxBudget, "budget must be within [0, " + std::to_string(kMaxBudget) + "]");
    for (const auto& item : items) {
        require(item.weight >= 1, "paragraph " + std::to_string(item.index) + " has non-positive weight");
        require(item.importance >= 0 && item.importance <= 10,
                "paragraph " + std::to_string(item.index) + " importance outside [0,10]");
    }
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
    std::erase_if(items, [&](const RatedParagraph& p) { return p.weight > budget; });

    // Value of the best subset of items[i..] with capacity c, ordered by
    // (importance, -weight). Suffix tables let the forward walk prefer
    // inclusion of the earliest index on ties.
    struct Value {
        int importance = 0;
        int weight = 0;
        bool better_than(const Value& o) const {
            return importance != o.importance ? importance > o.importance : weight < o.weight;
        }
        bool operator==(const Value&) const = default;
    };
    const size_t n = items.size();
    const size_t width = static_cast<size_t>(budget) + 1;
    std::vector<Value> next(width), current(width);
    std::vector<bool> take(n * width, false);
    for (size_t i = n; i-- > 0;) {
        const auto& item = items[i];
        for (size_t c = 0; c < width; ++c) {
            Value skip = next[c];
            current[c] = skip;
            if (static_cast<size_t>(item.weight) <= c) {
                Value with = next[c - static_cast<size_t>(item.weight)];
                with.importance += item.importance;
                with.weight += item.weight;
                if (with.better_than(skip) || with == skip) {
                    current[c] = with;
                    take[i * width + c] = true;
                }
            }
        }
        std::swap(next, current);
    }

    Selection out;
    size_t c = width - 1;
    for (size_t i = 0; i < n; ++i) {
        if (!take[i * width + c]) continue;
        out.indices.push_back(items[i].index);
        out.total_weight += items[i].weight;
        out.total_importance += items[i].importance;
        c -= static_cast<size_t>(items[i].weight);
    }
    return out;
}

struct PackOptions {
    int budget = 6000;
    int default_importance = 5;
    std::function<int(std::string_view)> weight = estimate_weight;
};

inline std::optional<int> parse_importance(std::string_view reply) {
    auto trimmed = text::trim(reply);
    while (!trimmed.empty() && trimmed.back() == '.') trimmed.remove_suffix(1);
    auto value = text::parse_int(trimmed);
    if (!value || *value < 0 || *value > 10) return std::nullopt;
    return static_cast<int>(*value);
}

inline int score_paragraph(gateway::Gateway& gw, const Paragraph& paragraph, int default_importance) {
    gateway::AgentRequest request;
    request.tag = gateway::Tag::paragraph_score;
    request.system_prompt = prompts::paragraph_scoring();
    request.user_parts = {gateway::Part::of_text(paragraph.text)};
    for (int attempt = 1; attempt <= 2; ++attempt) {
        if (attempt > 1)
            request.user_parts.push_back(
                gateway::Part::of_text(prompts::reask("Reply with a single integer from 0 to 10.", attempt)));
        std::string reply;
        try {
            reply = gw.complete(request).raw_text;
        } catch (const Error& e) {
            if (e.code() != Errc::empty_response) throw;
        }
        if (auto value = parse_importance(reply)) return *value;
    }
    log::warn("paragraph " + std::to_string(paragraph.index) + ": no usable importance, defaulting to " +
              std::to_string(default_importance));
    return default_importance;
}

inline std::vector<RatedParagraph> score_paragraphs(gateway::Gateway& gw, const ParsedDocument& doc,
                                                    const PackOptions& options = {}) {
    require(!doc.paragraphs.empty(), doc.meta.doc_id + ": no paragraphs to score");
    std::vector<RatedParagraph> out;
    for (const auto& p : doc.paragraphs)
        out.push_back({p.index, score_paragraph(gw, p, options.default_importance), options.weight(p.text)});
    return out;
}

inline int caption_weight(const ParsedDocument& doc, const PackOptions& options = {}) {
    int total = 0;
    for (const auto* list : {&doc.figures, &doc.tables})
        for (const auto& v : *list)
            if (!v.caption.empty()) total += options.weight(v.caption);
    return total;
}

inline PackedDocument pack_document(gateway::Gateway& gw, const ParsedDocument& doc, const PackOptions& options = {}) {
    require(options.budget >= 0 && options.budget <= kMaxBudget, "packer.budget out of range");
    PackedDocument packed;
    packed.doc_id = doc.meta.doc_id;
    packed.caption_weight = caption_weight(doc, options);
    packed.budget = std::max(0, options.budget - packed.caption_weight);

    long long all_weight = 0;
    for (const auto& p : doc.paragraphs) all_weight += options.weight(p.text);
    if (all_weight <= packed.budget) {
        for (const auto& p : doc.paragraphs) {
            packed.ratings.push_back({p.index, options.default_importance, options.weight(p.text)});
            packed.selected_indices.push_back(p.index);
            packed.total_weight += packed.ratings.back().weight;
            packed.total_importance += options.default_importance;
        }
        return packed;
    }
    packed.scored = true;
    packed.ratings = score_paragraphs(gw, doc, options);
    auto selection = select_paragraphs(packed.ratings, packed.budget);
    packed.selected_indices = std::move(selection.indices);
    packed.total_weight = selection.total_weight;
    packed.total_importance = selection.total_importance;
    return packed;
}

inline std::string packed_text(const ParsedDocument& doc, const PackedDocument& packed) {
    std::vector<std::string> pieces;
    for (int index : packed.selected_indices)
        if (index >= 0 && static_cast<size_t>(index) < doc.paragraphs.size())
            pieces.push_back(doc.paragraphs[static_cast<size_t>(index)].text);
    return text::join(pieces, "\n\n");
}

inline nlohmann::json to_json(const PackedDocument& p) {
    auto ratings = nlohmann::json::array();
    for (const auto& r : p.ratings)
        ratings.push_back({{"index", r.index}, {"importance", r.importance}, {"weight", r.weight}});
    return {{"doc_id", p.doc_id},           {"selected_indices", p.selected_indices},
            {"total_weight", p.total_weight}, {"total_importance", p.total_importance},
            {"budget", p.budget},             {"caption_weight", p.caption_weight},
            {"scored", p.scored},             {"ratings", ratings}};
}

inline PackedDocument packed_from_json(const nlohmann::json& j) {
    try {
        PackedDocument p;
        p.doc_id = j.at("doc_id").get<std::string>();
        p.selected_indices = j.at("selected_indices").get<std::vector<int>>();
        p.total_weight = j.at("total_weight").get<int>();
        p.total_importance = j.at("total_importance").get<int>();
        p.budget = j.at("budget").get<int>();
        p.caption_weight = j.value("caption_weight", 0);
        p.scored = j.value("scored", false);
        for (const auto& r : j.value("ratings", nlohmann::json::array()))
            p.ratings.push_back({r.at("index").get<int>(), r.at("importance").get<int>(), r.at("weight").get<int>()});
        return p;
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::schema_violation, std::string("packed document: ") + e.what());
    }
}

}  // namespace manalyzer::packer
