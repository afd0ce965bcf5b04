#pragma once

// Hit-rate evaluation of extracted values against gold data points.

#include "manalyzer/error.hpp"
#include "manalyzer/numeric.hpp"
#include "manalyzer/text.hpp"

#include <fmt/format.h>

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace manalyzer::eval {

struct GoldPoint {
    std::string doc_id;
    int level = 1;
    double value = 0;
    std::string unit;
    std::string label;
    std::string domain;  // optional
    bool operator==(const GoldPoint&) const = default;
};

struct HitRate {
    std::string doc_id;
    int level = 1;
    std::string domain;
    size_t hits = 0;
    size_t gold_count = 0;
    double rate = 0;
};

struct Tolerance {
    double abs = 1e-9;
    double rel = 1e-4;
    double rel_level3 = 1e-2;

    double rel_for(int level) const { return level == 3 ? rel_level3 : rel; }
};

inline bool admissible(double a, double b, double abs_tol, double rel_tol) {
    return numeric::within_tolerance(a, b, abs_tol, rel_tol);
}

// Maximum one-to-one matching (Kuhn's augmenting paths). Returns (extracted, gold) index pairs.
inline std::vector<std::pair<size_t, size_t>> match_values(const std::vector<double>& extracted,
                                                           const std::vector<double>& gold, double abs_tol,
                                                           double rel_tol) {
    require(abs_tol >= 0 && rel_tol >= 0, "tolerances must be non-negative");
    std::vector<std::vector<size_t>> adj(gold.size());
    for (size_t g = 0; g < gold.size(); ++g)
        for (size_t e = 0; e < extracted.size(); ++e)
            if (admissible(extracted[e], gold[g], abs_tol, rel_tol)) adj[g].push_back(e);
    std::vector<long> owner(extracted.size(), -1);
    std::vector<char> seen;
    auto augment = [&](auto&& self, size_t g) -> bool {
        for (size_t e : adj[g]) {
            if (seen[e]) continue;
            seen[e] = 1;
            if (owner[e] < 0 || self(self, static_cast<size_t>(owner[e]))) {
                owner[e] = static_cast<long>(g);
                return true;
            }
        }
        return false;
    };
    for (size_t g = 0; g < gold.size(); ++g) {
        seen.assign(extracted.size(), 0);
        augment(augment, g);
    }
    std::vector<std::pair<size_t, size_t>> pairs;
    for (size_t e = 0; e < extracted.size(); ++e)
        if (owner[e] >= 0) pairs.emplace_back(e, static_cast<size_t>(owner[e]));
    return pairs;
}

inline HitRate hit_rate(const std::vector<double>& extracted, const std::vector<GoldPoint>& gold, const Tolerance& tol = {}) {
    if (gold.empty()) fail(Errc::empty_gold, "no gold points for this document and level");
    HitRate r;
    r.doc_id = gold.front().doc_id;
    r.level = gold.front().level;
    r.domain = gold.front().domain;
    std::vector<double> values;
    for (const auto& g : gold) values.push_back(g.value);
    r.hits = match_values(extracted, values, tol.abs, tol.rel_for(r.level)).size();
    r.gold_count = gold.size();
    r.rate = static_cast<double>(r.hits) / static_cast<double>(r.gold_count);
    return r;
}

struct LevelMean {
    double mean = 0;
    size_t documents = 0;
};

struct Aggregate {
    std::map<int, LevelMean> by_level;
    std::map<std::string, std::map<int, LevelMean>> by_domain;  // only for domain-tagged documents
};

inline Aggregate aggregate(const std::vector<HitRate>& results) {
    Aggregate a;
    auto add = [](LevelMean& m, double rate) {
        m.mean += rate;
        ++m.documents;
    };
    for (const auto& r : results) {
        add(a.by_level[r.level], r.rate);
        if (!r.domain.empty()) add(a.by_domain[r.domain][r.level], r.rate);
    }
    auto finish = [](std::map<int, LevelMean>& levels) {
        for (auto& [level, m] : levels) m.mean /= static_cast<double>(m.documents);
    };
    finish(a.by_level);
    for (auto& [domain, levels] : a.by_domain) finish(levels);
    return a;
}

// Tab-separated: doc_id, level, value, unit, label[, domain]. A leading
// "doc_id" header line and blank lines are skipped.
inline std::vector<GoldPoint> parse_gold(std::string_view content) {
    std::vector<GoldPoint> points;
    int line_no = 0;
    for (const auto& raw : text::split_lines(content)) {
        ++line_no;
        if (text::trim(raw).empty()) continue;
        auto fields = text::split(raw, '\t');
        for (auto& f : fields) f = std::string(text::trim(f));
        if (fields[0] == "doc_id") continue;
        auto where = "gold line " + std::to_string(line_no) + ": ";
        if (fields.size() != 5 && fields.size() != 6)
            fail(Errc::schema_violation, where + "expected 5 or 6 tab-separated fields");
        GoldPoint p;
        p.doc_id = fields[0];
        auto level = text::parse_int(fields[1]);
        if (!level || *level < 1 || *level > 3) fail(Errc::schema_violation, where + "level must be 1, 2 or 3");
        p.level = static_cast<int>(*level);
        auto value = text::parse_double(fields[2]);
        if (!value || !std::isfinite(*value)) fail(Errc::schema_violation, where + "value must be a finite number");
        p.value = *value;
        p.unit = fields[3];
        p.label = fields[4];
        if (fields.size() == 6) p.domain = fields[5];
        if (p.doc_id.empty()) fail(Errc::schema_violation, where + "empty doc_id");
        points.push_back(std::move(p));
    }
    return points;
}

inline std::vector<GoldPoint> load_gold(const std::filesystem::path& file) { return parse_gold(text::read_file(file)); }

inline std::string serialize_gold(const std::vector<GoldPoint>& points) {
    std::string out;
    for (const auto& p : points) {
        out += p.doc_id + "\t" + std::to_string(p.level) + "\t" + fmt::format("{}", p.value) + "\t" + p.unit + "\t" + p.label;
        if (!p.domain.empty()) out += "\t" + p.domain;
        out += "\n";
    }
    return out;
}

inline std::map<std::pair<std::string, int>, std::vector<GoldPoint>> group_gold(const std::vector<GoldPoint>& points) {
    std::map<std::pair<std::string, int>, std::vector<GoldPoint>> groups;
    for (const auto& p : points) groups[{p.doc_id, p.level}].push_back(p);
    return groups;
}

// One result per (doc, level) in the gold file; a document with no
// extracted values scores 0.
inline std::vector<HitRate> evaluate(const std::map<std::string, std::vector<double>>& extracted,
                                     const std::vector<GoldPoint>& gold, const Tolerance& tol = {}) {
    std::vector<HitRate> results;
    static const std::vector<double> none;
    for (const auto& [key, points] : group_gold(gold)) {
        auto it = extracted.find(key.first);
        results.push_back(hit_rate(it == extracted.end() ? none : it->second, points, tol));
    }
    return results;
}

inline std::string render_levels(const Aggregate& a) {
    auto cell = [](const std::map<int, LevelMean>& levels, int level) {
        auto it = levels.find(level);
        return it == levels.end() ? std::string("-") : fmt::format("{:.2f}", 100.0 * it->second.mean);
    };
    std::string out = "| Domain | Level 1 | Level 2 | Level 3 |\n|---|---|---|---|\n";
    for (const auto& [domain, levels] : a.by_domain)
        out += "| " + domain + " | " + cell(levels, 1) + " | " + cell(levels, 2) + " | " + cell(levels, 3) + " |\n";
    out += "| All | " + cell(a.by_level, 1) + " | " + cell(a.by_level, 2) + " | " + cell(a.by_level, 3) + " |\n";
    return out;
}

}  // namespace manalyzer::eval
