#pragma once

// Merging of accepted tables and a fixed analysis toolkit (k-means, 1-NN,
// least squares) driven by an agent-written plan.

#include "manalyzer/extraction.hpp"
#include "manalyzer/gateway.hpp"
#include "manalyzer/log.hpp"
#include "manalyzer/numeric.hpp"
#include "manalyzer/prompts.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace manalyzer::analysis {

struct MergedRow {
    std::string doc_id;
    std::vector<numeric::Cell> cells;  // one per template column
    bool operator==(const MergedRow&) const = default;
};

struct MergedTable {
    std::vector<std::string> columns;  // template columns; doc_id is implicit and first
    std::vector<MergedRow> rows;
    size_t missing_count = 0;

    size_t row_count() const { return rows.size(); }
    std::vector<std::string> header() const {
        std::vector<std::string> h{"doc_id"};
        h.insert(h.end(), columns.begin(), columns.end());
        return h;
    }
    int column_index(const std::string& name) const {
        for (size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return static_cast<int>(i);
        return -1;
    }
    bool operator==(const MergedTable&) const = default;
};

inline MergedTable merge_tables(std::vector<extraction::ExtractedTable> tables, const std::vector<std::string>& columns) {
    std::stable_sort(tables.begin(), tables.end(), [](const auto& a, const auto& b) { return a.doc_id < b.doc_id; });
    MergedTable merged;
    merged.columns = columns;
    for (const auto& t : tables) {
        if (t.header != columns)
            fail(Errc::header_mismatch, t.doc_id + ": table header differs from the template");
        for (const auto& row : t.rows) {
            merged.rows.push_back({t.doc_id, row});
            for (const auto& c : row) merged.missing_count += !c.has_value();
        }
    }
    return merged;
}

inline std::string render_merged(const MergedTable& m, size_t max_rows = std::numeric_limits<size_t>::max()) {
    markdown::Table t;
    t.header = m.header();
    for (size_t i = 0; i < m.rows.size() && i < max_rows; ++i) {
        std::vector<std::string> cells{m.rows[i].doc_id};
        for (const auto& c : m.rows[i].cells) cells.push_back(numeric::render(c));
        t.rows.push_back(std::move(cells));
    }
    return markdown::render(t);
}

// ------------------------------------------------------------------ profiles

struct ColumnProfile {
    std::string name;
    size_t present = 0;
    bool constant = true;
    bool discrete = false;  // integral values with 2..10 distinct classes
    size_t classes = 0;
};

inline std::vector<ColumnProfile> profile(const MergedTable& m) {
    std::vector<ColumnProfile> out;
    for (size_t c = 0; c < m.columns.size(); ++c) {
        ColumnProfile p;
        p.name = m.columns[c];
        std::set<double> distinct;
        bool integral = true;
        for (const auto& row : m.rows) {
            if (!row.cells[c]) continue;
            double v = *row.cells[c];
            ++p.present;
            distinct.insert(v);
            integral = integral && std::floor(v) == v;
        }
        p.classes = distinct.size();
        p.constant = distinct.size() < 2;
        p.discrete = integral && p.classes >= 2 && p.classes <= 10;
        out.push_back(p);
    }
    return out;
}

// --------------------------------------------------------------------- plans

enum class Kind { clustering, classification, regression };

inline std::string_view to_string(Kind k) {
    switch (k) {
        case Kind::clustering: return "clustering";
        case Kind::classification: return "classification";
        case Kind::regression: return "regression";
    }
    return "clustering";
}

struct Step {
    Kind kind = Kind::clustering;
    std::vector<std::string> features;  // regression: empty means row index
    std::string label;                  // classification
    std::string response;               // regression
    int k = 3;
    std::string title;
    bool operator==(const Step&) const = default;
};

using Plan = std::vector<Step>;

struct Permitted {
    bool clustering = false, classification = false, regression = false;
};

inline Permitted permitted_kinds(const std::vector<ColumnProfile>& profiles) {
    Permitted p;
    size_t usable = 0;
    for (const auto& c : profiles) usable += c.present >= 2;
    for (const auto& c : profiles) {
        if (c.present < 2) continue;
        p.clustering = true;
        p.regression = p.regression || !c.constant;
        if (c.discrete && usable >= 2) p.classification = true;
    }
    return p;
}

inline std::optional<std::string> step_problem(const Step& s, const std::vector<ColumnProfile>& profiles) {
    auto find = [&](const std::string& name) -> const ColumnProfile* {
        for (const auto& p : profiles)
            if (p.name == name) return &p;
        return nullptr;
    };
    for (const auto& f : s.features)
        if (!find(f)) return "unknown column '" + f + "'";
    switch (s.kind) {
        case Kind::clustering:
            if (s.features.empty()) return std::string("clustering needs feature columns");
            if (s.k < 2) return std::string("k must be at least 2");
            return std::nullopt;
        case Kind::classification: {
            const auto* label = find(s.label);
            if (!label) return "unknown label column '" + s.label + "'";
            if (!label->discrete) return "label column '" + s.label + "' is not discrete";
            if (s.features.empty()) return std::string("classification needs feature columns");
            if (std::find(s.features.begin(), s.features.end(), s.label) != s.features.end())
                return std::string("label column used as a feature");
            return std::nullopt;
        }
        case Kind::regression:
            if (!find(s.response)) return "unknown response column '" + s.response + "'";
            if (s.features.size() > 1) return std::string("regression takes a single feature");
            return std::nullopt;
    }
    return std::nullopt;
}

inline Step default_step(Kind kind, const std::vector<ColumnProfile>& profiles) {
    Step s;
    s.kind = kind;
    std::vector<std::string> usable;
    for (const auto& p : profiles)
        if (p.present >= 2) usable.push_back(p.name);
    switch (kind) {
        case Kind::clustering:
            s.features = usable;
            s.k = 2;
            s.title = "Rows grouped into 2 clusters over " + text::join(usable, ", ") + ".";
            break;
        case Kind::classification:
            for (const auto& p : profiles)
                if (p.discrete && p.present >= 2) {
                    s.label = p.name;
                    break;
                }
            for (const auto& u : usable)
                if (u != s.label) s.features.push_back(u);
            s.title = "Leave-one-out nearest-neighbour prediction of " + s.label + ".";
            break;
        case Kind::regression: {
            for (auto it = profiles.rbegin(); it != profiles.rend(); ++it)
                if (it->present >= 2 && !it->constant) {
                    s.response = it->name;
                    break;
                }
            for (const auto& p : profiles)
                if (p.name != s.response && p.present >= 2 && !p.constant) {
                    s.features = {p.name};
                    break;
                }
            s.title = "Least-squares line of " + s.response + " against " +
                      (s.features.empty() ? std::string("row index") : s.features[0]) + ".";
            break;
        }
    }
    return s;
}

inline std::optional<nlohmann::json> find_json_object(std::string_view reply) {
    auto try_parse = [](std::string_view s) -> std::optional<nlohmann::json> {
        auto open = s.find('{');
        auto close = s.rfind('}');
        if (open == std::string_view::npos || close == std::string_view::npos || close < open) return std::nullopt;
        try {
            return nlohmann::json::parse(s.substr(open, close - open + 1));
        } catch (const nlohmann::json::exception&) {
            return std::nullopt;
        }
    };
    for (const auto& block : text::fenced_blocks(reply))
        if (auto j = try_parse(block)) return j;
    return try_parse(reply);
}

inline std::optional<std::vector<Step>> parse_plan(std::string_view reply) {
    auto j = find_json_object(reply);
    if (!j || !j->contains("steps") || !(*j)["steps"].is_array()) return std::nullopt;
    std::vector<Step> steps;
    for (const auto& item : (*j)["steps"]) {
        if (!item.is_object() || !item.contains("kind") || !item["kind"].is_string()) continue;
        Step s;
        auto kind = text::lower(item["kind"].get<std::string>());
        if (kind == "clustering") s.kind = Kind::clustering;
        else if (kind == "classification") s.kind = Kind::classification;
        else if (kind == "regression") s.kind = Kind::regression;
        else continue;
        auto strings = [&](const char* key) {
            std::vector<std::string> out;
            if (item.contains(key) && item[key].is_array())
                for (const auto& v : item[key])
                    if (v.is_string()) out.push_back(v.get<std::string>());
            return out;
        };
        s.features = strings("features");
        if (item.contains("feature") && item["feature"].is_string()) {
            auto f = item["feature"].get<std::string>();
            if (text::lower(f) != "index" && text::lower(f) != "row index") s.features = {f};
        }
        s.label = item.value("label", "");
        s.response = item.value("response", "");
        if (item.contains("k") && item["k"].is_number_integer()) s.k = item["k"].get<int>();
        s.title = item.value("title", "");
        steps.push_back(std::move(s));
    }
    return steps;
}

inline std::string column_summary(const MergedTable& merged) {
    std::string out = "Columns of the merged table (" + std::to_string(merged.row_count()) + " rows):";
    for (const auto& p : profile(merged))
        out += "\n- " + p.name + ": " + std::to_string(p.present) + " values, " + std::to_string(p.classes) +
               " distinct" + (p.discrete ? ", integral" : "");
    return out;
}

inline Plan plan_analysis(gateway::Gateway& gw, const MergedTable& merged, const std::string& topic,
                          const std::string& field = "environmental science") {
    auto profiles = profile(merged);
    auto allowed = permitted_kinds(profiles);
    require(allowed.clustering, "merged table has no numeric column with at least two values");
    gateway::AgentRequest request;
    request.tag = gateway::Tag::plan;
    request.system_prompt = prompts::analyst(field);
    request.user_parts = {gateway::Part::of_text("Research topic: " + topic),
                          gateway::Part::of_text(column_summary(merged)),
                          gateway::Part::of_text("First rows:\n" + render_merged(merged, 10))};
    std::optional<std::vector<Step>> parsed;
    for (int attempt = 1; attempt <= 2 && !parsed; ++attempt) {
        if (attempt > 1)
            request.user_parts.push_back(gateway::Part::of_text(
                prompts::reask("Reply with a JSON object {\"steps\": [...]} only.", attempt)));
        std::string reply;
        try {
            reply = gw.complete(request).raw_text;
        } catch (const Error& e) {
            if (e.code() != Errc::empty_response) throw;
        }
        parsed = parse_plan(reply);
    }
    if (!parsed) fail(Errc::no_valid_steps, "analysis plan reply unparseable after re-ask");

    Plan plan;
    std::set<Kind> seen;
    for (auto& s : *parsed) {
        if (auto problem = step_problem(s, profiles)) {
            log::warn("dropping " + std::string(to_string(s.kind)) + " step: " + *problem);
            continue;
        }
        if (s.title.empty()) s.title = default_step(s.kind, profiles).title;
        seen.insert(s.kind);
        plan.push_back(std::move(s));
    }
    auto fill = [&](Kind kind, bool ok) {
        if (ok && !seen.count(kind)) {
            log::info("adding default " + std::string(to_string(kind)) + " step");
            plan.push_back(default_step(kind, profiles));
        }
    };
    fill(Kind::clustering, allowed.clustering);
    fill(Kind::classification, allowed.classification);
    fill(Kind::regression, allowed.regression);
    if (plan.empty()) fail(Errc::no_valid_steps, "no analysis step is possible on this table");
    return plan;
}

// ------------------------------------------------------------------- toolkit

struct Result {
    size_t step = 0;  // 1-based position in the plan
    Step spec;
    bool skipped = false;
    std::string reason;
    size_t used_rows = 0;
    size_t excluded_rows = 0;
    nlohmann::json stats;
    std::vector<std::string> tsv_header;
    std::vector<std::vector<std::string>> tsv_rows;

    std::string stem() const { return "step" + std::to_string(step) + "_" + std::string(to_string(spec.kind)); }
};

// Uniform [0,1) from 53 high bits, identical on every platform.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct KMeans {
    std::vector<int> assignment;
    std::vector<std::vector<double>> centers;
    int iterations = 0;
};

inline double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0;
    for (size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
    return d;
}

inline KMeans kmeans(const std::vector<std::vector<double>>& points, int k, uint64_t seed, int max_iter = 100) {
    require(k >= 1 && points.size() >= static_cast<size_t>(k), "k-means needs at least k points");
    std::mt19937_64 rng(seed);
    KMeans out;
    const size_t n = points.size();
    out.centers.push_back(points[std::min(n - 1, static_cast<size_t>(uniform01(rng) * static_cast<double>(n)))]);
    std::vector<double> d2(n);
    while (out.centers.size() < static_cast<size_t>(k)) {
        double total = 0;
        for (size_t i = 0; i < n; ++i) {
            d2[i] = std::numeric_limits<double>::infinity();
            for (const auto& c : out.centers) d2[i] = std::min(d2[i], squared_distance(points[i], c));
            total += d2[i];
        }
        size_t pick = 0;
        if (total <= 0) {
            pick = std::min(n - 1, static_cast<size_t>(uniform01(rng) * static_cast<double>(n)));
        } else {
            double target = uniform01(rng) * total, acc = 0;
            pick = n - 1;
            for (size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc > target) {
                    pick = i;
                    break;
                }
            }
        }
        out.centers.push_back(points[pick]);
    }
    out.assignment.assign(n, -1);
    for (out.iterations = 1; out.iterations <= max_iter; ++out.iterations) {
        bool changed = false;
        for (size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = squared_distance(points[i], out.centers[0]);
            for (int c = 1; c < k; ++c) {
                double d = squared_distance(points[i], out.centers[static_cast<size_t>(c)]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            changed = changed || out.assignment[i] != best;
            out.assignment[i] = best;
        }
        if (!changed) break;
        for (int c = 0; c < k; ++c) {
            std::vector<double> sum(points[0].size(), 0.0);
            size_t members = 0;
            for (size_t i = 0; i < n; ++i)
                if (out.assignment[i] == c) {
                    for (size_t d = 0; d < sum.size(); ++d) sum[d] += points[i][d];
                    ++members;
                }
            if (members == 0) continue;  // empty cluster keeps its center
            for (auto& v : sum) v /= static_cast<double>(members);
            out.centers[static_cast<size_t>(c)] = sum;
        }
    }
    out.iterations = std::min(out.iterations, max_iter);
    return out;
}

// Leave-one-out 1-NN accuracy; distance ties go to the lowest row.
inline std::vector<int> loo_nearest_neighbour(const std::vector<std::vector<double>>& x, const std::vector<int>& y) {
    std::vector<int> predicted(x.size(), 0);
    for (size_t i = 0; i < x.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (size_t j = 0; j < x.size(); ++j) {
            if (i == j) continue;
            double d = squared_distance(x[i], x[j]);
            if (d < best) {
                best = d;
                predicted[i] = y[j];
            }
        }
    }
    return predicted;
}

struct Ols {
    double slope = 0, intercept = 0, r2 = 0;
};

inline std::optional<Ols> least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    const size_t n = x.size();
    if (n < 2) return std::nullopt;
    double mx = 0, my = 0;
    for (size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0, sxy = 0, syy = 0;
    for (size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0 || syy == 0) return std::nullopt;
    Ols fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0;
    for (size_t i = 0; i < n; ++i) {
        double e = y[i] - (fit.intercept + fit.slope * x[i]);
        ss_res += e * e;
    }
    fit.r2 = 1.0 - ss_res / syy;
    return fit;
}

// z-scores per column; zero-variance columns are only centred.
inline std::vector<std::vector<double>> standardize(std::vector<std::vector<double>> points) {
    if (points.empty()) return points;
    for (size_t d = 0; d < points[0].size(); ++d) {
        double mean = 0, var = 0;
        for (const auto& p : points) mean += p[d];
        mean /= static_cast<double>(points.size());
        for (const auto& p : points) var += (p[d] - mean) * (p[d] - mean);
        double sd = std::sqrt(var / static_cast<double>(points.size()));
        for (auto& p : points) p[d] = sd > 0 ? (p[d] - mean) / sd : p[d] - mean;
    }
    return points;
}

inline std::string fmt_num(double v) { return fmt::format("{}", v); }

inline Result run_step(const Step& step, size_t position, const MergedTable& merged, uint64_t seed) {
    Result r;
    r.step = position;
    r.spec = step;
    std::vector<int> cols;
    for (const auto& f : step.features) cols.push_back(merged.column_index(f));
    int label_col = step.kind == Kind::classification ? merged.column_index(step.label) : -1;
    int response_col = step.kind == Kind::regression ? merged.column_index(step.response) : -1;

    std::vector<size_t> rows;
    for (size_t i = 0; i < merged.rows.size(); ++i) {
        const auto& cells = merged.rows[i].cells;
        bool ok = std::all_of(cols.begin(), cols.end(), [&](int c) { return c >= 0 && cells[static_cast<size_t>(c)]; });
        if (label_col >= 0) ok = ok && cells[static_cast<size_t>(label_col)];
        if (response_col >= 0) ok = ok && cells[static_cast<size_t>(response_col)];
        if (ok) rows.push_back(i);
    }
    r.used_rows = rows.size();
    r.excluded_rows = merged.rows.size() - rows.size();
    auto skip = [&](std::string why) {
        r.skipped = true;
        r.reason = std::move(why);
        r.stats = nlohmann::json::object();
        return r;
    };
    auto features = [&](size_t i) {
        std::vector<double> p;
        for (int c : cols) p.push_back(*merged.rows[i].cells[static_cast<size_t>(c)]);
        return p;
    };

    switch (step.kind) {
        case Kind::clustering: {
            if (rows.size() < static_cast<size_t>(step.k))
                return skip("only " + std::to_string(rows.size()) + " complete rows for k = " + std::to_string(step.k));
            std::vector<std::vector<double>> raw;
            for (size_t i : rows) raw.push_back(features(i));
            auto km = kmeans(standardize(raw), step.k, seed);
            std::vector<size_t> sizes(static_cast<size_t>(step.k), 0);
            std::vector<std::vector<double>> centroids(static_cast<size_t>(step.k), std::vector<double>(cols.size(), 0.0));
            for (size_t i = 0; i < raw.size(); ++i) {
                auto c = static_cast<size_t>(km.assignment[i]);
                ++sizes[c];
                for (size_t d = 0; d < cols.size(); ++d) centroids[c][d] += raw[i][d];
            }
            for (size_t c = 0; c < sizes.size(); ++c)
                for (auto& v : centroids[c]) v = sizes[c] ? v / static_cast<double>(sizes[c]) : 0.0;
            r.stats = {{"k", step.k}, {"sizes", sizes}, {"centroids", centroids}, {"iterations", km.iterations}};
            r.tsv_header = {"doc_id"};
            r.tsv_header.insert(r.tsv_header.end(), step.features.begin(), step.features.end());
            r.tsv_header.push_back("cluster");
            for (size_t i = 0; i < rows.size(); ++i) {
                std::vector<std::string> line{merged.rows[rows[i]].doc_id};
                for (double v : raw[i]) line.push_back(fmt_num(v));
                line.push_back(std::to_string(km.assignment[i]));
                r.tsv_rows.push_back(std::move(line));
            }
            break;
        }
        case Kind::classification: {
            std::vector<std::vector<double>> raw;
            std::vector<int> labels;
            std::map<int, size_t> counts;
            for (size_t i : rows) {
                raw.push_back(features(i));
                labels.push_back(static_cast<int>(*merged.rows[i].cells[static_cast<size_t>(label_col)]));
                ++counts[labels.back()];
            }
            if (counts.size() < 2) return skip("label column '" + step.label + "' has fewer than two classes");
            if (rows.size() < 3) return skip("fewer than three complete rows");
            auto predicted = loo_nearest_neighbour(standardize(raw), labels);
            size_t correct = 0;
            for (size_t i = 0; i < labels.size(); ++i) correct += predicted[i] == labels[i];
            nlohmann::json class_counts = nlohmann::json::object();
            for (const auto& [label, n] : counts) class_counts[std::to_string(label)] = n;
            r.stats = {{"accuracy", static_cast<double>(correct) / static_cast<double>(labels.size())},
                       {"correct", correct},
                       {"classes", class_counts}};
            r.tsv_header = {"doc_id"};
            r.tsv_header.insert(r.tsv_header.end(), step.features.begin(), step.features.end());
            r.tsv_header.insert(r.tsv_header.end(), {step.label, "predicted"});
            for (size_t i = 0; i < rows.size(); ++i) {
                std::vector<std::string> line{merged.rows[rows[i]].doc_id};
                for (double v : raw[i]) line.push_back(fmt_num(v));
                line.push_back(std::to_string(labels[i]));
                line.push_back(std::to_string(predicted[i]));
                r.tsv_rows.push_back(std::move(line));
            }
            break;
        }
        case Kind::regression: {
            std::vector<double> x, y;
            for (size_t i : rows) {
                x.push_back(cols.empty() ? static_cast<double>(i) : *merged.rows[i].cells[static_cast<size_t>(cols[0])]);
                y.push_back(*merged.rows[i].cells[static_cast<size_t>(response_col)]);
            }
            auto fit = least_squares(x, y);
            if (!fit) return skip("fewer than two points or zero variance in " + step.response + " or the feature");
            r.stats = {{"slope", fit->slope}, {"intercept", fit->intercept}, {"r2", fit->r2}, {"n", x.size()}};
            r.tsv_header = {"doc_id", cols.empty() ? std::string("row_index") : step.features[0], step.response, "fitted"};
            for (size_t i = 0; i < rows.size(); ++i)
                r.tsv_rows.push_back({merged.rows[rows[i]].doc_id, fmt_num(x[i]), fmt_num(y[i]),
                                      fmt_num(fit->intercept + fit->slope * x[i])});
            break;
        }
    }
    return r;
}

inline std::vector<Result> run_analysis(const Plan& plan, const MergedTable& merged, uint64_t seed = 42) {
    std::vector<Result> results;
    for (size_t i = 0; i < plan.size(); ++i) {
        results.push_back(run_step(plan[i], i + 1, merged, seed));
        if (results.back().skipped)
            log::warn("analysis step " + std::to_string(i + 1) + " skipped: " + results.back().reason);
    }
    return results;
}

inline nlohmann::json to_json(const Step& s) {
    nlohmann::json j = {{"kind", to_string(s.kind)}, {"features", s.features}, {"title", s.title}};
    if (s.kind == Kind::clustering) j["k"] = s.k;
    if (s.kind == Kind::classification) j["label"] = s.label;
    if (s.kind == Kind::regression) j["response"] = s.response;
    return j;
}

inline nlohmann::json to_json(const Result& r) {
    return {{"step", r.step},          {"spec", to_json(r.spec)},         {"skipped", r.skipped},
            {"reason", r.reason},      {"used_rows", r.used_rows},        {"excluded_rows", r.excluded_rows},
            {"stats", r.stats},        {"artifact", "analysis/" + r.stem() + ".tsv"}};
}

inline Step step_from_json(const nlohmann::json& j) {
    Step s;
    auto kind = j.at("kind").get<std::string>();
    s.kind = kind == "classification" ? Kind::classification : kind == "regression" ? Kind::regression : Kind::clustering;
    s.features = j.at("features").get<std::vector<std::string>>();
    s.title = j.value("title", "");
    s.k = j.value("k", 3);
    s.label = j.value("label", "");
    s.response = j.value("response", "");
    return s;
}

// Artifact rows are not part of the record; they live in the .tsv file.
inline Result result_from_json(const nlohmann::json& j) {
    try {
        Result r;
        r.step = j.at("step").get<size_t>();
        r.spec = step_from_json(j.at("spec"));
        r.skipped = j.at("skipped").get<bool>();
        r.reason = j.at("reason").get<std::string>();
        r.used_rows = j.at("used_rows").get<size_t>();
        r.excluded_rows = j.at("excluded_rows").get<size_t>();
        r.stats = j.at("stats");
        return r;
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::schema_violation, std::string("analysis result: ") + e.what());
    }
}

inline std::string merged_tsv(const MergedTable& m) {
    std::string out = text::join(m.header(), "\t") + "\n";
    for (const auto& row : m.rows) {
        std::vector<std::string> cells{row.doc_id};
        for (const auto& c : row.cells) cells.push_back(numeric::render(c));
        out += text::join(cells, "\t") + "\n";
    }
    return out;
}

inline std::string render_tsv(const Result& r) {
    std::string out = text::join(r.tsv_header, "\t") + "\n";
    for (const auto& row : r.tsv_rows) out += text::join(row, "\t") + "\n";
    return out;
}

// Writes analysis/<stem>.tsv then analysis/<stem>.json for every result.
inline void write_artifacts(const std::vector<Result>& results, const std::filesystem::path& workspace_root) {
    for (const auto& r : results) {
        text::write_file(workspace_root / "analysis" / (r.stem() + ".tsv"), render_tsv(r));
        text::write_file(workspace_root / "analysis" / (r.stem() + ".json"), to_json(r).dump(2) + "\n");
    }
}

}  // namespace manalyzer::analysis
