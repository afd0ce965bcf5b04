#pragma once

// Flat "key = value" pipeline configuration.

#include "manalyzer/digest.hpp"
#include "manalyzer/error.hpp"
#include "manalyzer/text.hpp"

#include <fmt/format.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>

namespace manalyzer::config {

struct Config {
    std::string field = "environmental science";

    std::string provider_kind = "mock";  // mock | openai
    std::string provider_script;          // mock replies, resolved path
    std::string provider_base_url = "https://api.openai.com/v1";
    std::string provider_model = "gpt-4o";
    std::string provider_vision_model;
    std::string provider_api_key_env = "OPENAI_API_KEY";
    int provider_max_in_flight = 4;
    int provider_retries = 3;
    int provider_timeout_s = 120;

    std::string collector_sources = "both";  // crossref | arxiv | both
    int collector_max_results = 50;
    std::string collector_crossref_base = "https://api.crossref.org";
    std::string collector_arxiv_base = "http://export.arxiv.org/api";
    std::string collector_mailto;

    int packer_budget = 6000;
    int packer_default_importance = 5;

    double reviewer_threshold = 8.0;
    int reviewer_batch_size = 20;
    int reviewer_excerpt_chars = 1500;

    std::string extraction_template;  // resolved path
    int extraction_accept_overall = 7;
    int extraction_max_iter = 3;
    int extraction_mask_batch = 10;

    double eval_abs_tol = 1e-9;
    double eval_rel_tol = 1e-4;
    double eval_rel_tol_level3 = 1e-2;

    long long analysis_seed = 42;
    int max_concurrency = 4;
};

namespace detail {

inline int to_int(const std::string& key, const std::string& v) {
    auto parsed = text::parse_int(v);
    if (!parsed || *parsed < INT32_MIN || *parsed > INT32_MAX)
        fail(Errc::config_invalid, key + ": expected an integer, got '" + v + "'");
    return static_cast<int>(*parsed);
}

inline double to_double(const std::string& key, const std::string& v) {
    auto parsed = text::parse_double(v);
    if (!parsed || !std::isfinite(*parsed)) fail(Errc::config_invalid, key + ": expected a number, got '" + v + "'");
    return *parsed;
}

inline std::string resolve(const std::string& v, const std::filesystem::path& base) {
    if (v.empty()) return v;
    std::filesystem::path p(v);
    return (p.is_absolute() ? p : std::filesystem::absolute(base / p)).lexically_normal().string();
}

}  // namespace detail

inline void validate(const Config& c) {
    auto check = [](bool ok, const std::string& msg) {
        if (!ok) fail(Errc::config_invalid, msg);
    };
    check(c.provider_kind == "mock" || c.provider_kind == "openai", "provider.kind must be mock or openai");
    check(c.provider_max_in_flight >= 1, "provider.max_in_flight must be >= 1");
    check(c.provider_retries >= 0, "provider.retries must be >= 0");
    check(c.provider_timeout_s >= 1, "provider.timeout_s must be >= 1");
    check(c.collector_sources == "crossref" || c.collector_sources == "arxiv" || c.collector_sources == "both",
          "collector.sources must be crossref, arxiv or both");
    check(c.collector_max_results >= 1, "collector.max_results must be >= 1");
    check(c.packer_budget >= 0 && c.packer_budget <= 131072, "packer.budget must be within [0, 131072]");
    check(c.packer_default_importance >= 0 && c.packer_default_importance <= 10,
          "packer.default_importance must be within [0, 10]");
    check(c.reviewer_threshold >= 0 && c.reviewer_threshold <= 20, "reviewer.threshold must be within [0, 20]");
    check(c.reviewer_batch_size >= 1, "reviewer.batch_size must be >= 1");
    check(c.reviewer_excerpt_chars >= 1, "reviewer.excerpt_chars must be >= 1");
    check(c.extraction_accept_overall >= 1 && c.extraction_accept_overall <= 10,
          "extraction.accept_overall must be within [1, 10]");
    check(c.extraction_max_iter >= 1 && c.extraction_max_iter <= 3, "extraction.max_iter must be within [1, 3]");
    check(c.extraction_mask_batch >= 1, "extraction.mask_batch must be >= 1");
    check(c.eval_abs_tol >= 0 && c.eval_rel_tol >= 0 && c.eval_rel_tol_level3 >= 0, "tolerances must be >= 0");
    check(c.max_concurrency >= 1, "max_concurrency must be >= 1");
}

// Relative paths are resolved against `base` (the config file's directory).
inline Config parse(std::string_view content, const std::filesystem::path& base = ".") {
    Config c;
    std::map<std::string, std::function<void(const std::string&, const std::string&)>> setters;
    auto str = [&](const char* key, std::string& field) {
        setters[key] = [&field](const std::string&, const std::string& v) { field = v; };
    };
    auto path = [&](const char* key, std::string& field) {
        setters[key] = [&field, &base](const std::string&, const std::string& v) { field = detail::resolve(v, base); };
    };
    auto integer = [&](const char* key, int& field) {
        setters[key] = [&field](const std::string& k, const std::string& v) { field = detail::to_int(k, v); };
    };
    auto real = [&](const char* key, double& field) {
        setters[key] = [&field](const std::string& k, const std::string& v) { field = detail::to_double(k, v); };
    };
    str("field", c.field);
    str("provider.kind", c.provider_kind);
    path("provider.script", c.provider_script);
    str("provider.base_url", c.provider_base_url);
    str("provider.model", c.provider_model);
    str("provider.vision_model", c.provider_vision_model);
    str("provider.api_key_env", c.provider_api_key_env);
    integer("provider.max_in_flight", c.provider_max_in_flight);
    integer("provider.retries", c.provider_retries);
    integer("provider.timeout_s", c.provider_timeout_s);
    str("collector.sources", c.collector_sources);
    integer("collector.max_results", c.collector_max_results);
    str("collector.crossref_base", c.collector_crossref_base);
    str("collector.arxiv_base", c.collector_arxiv_base);
    str("collector.mailto", c.collector_mailto);
    integer("packer.budget", c.packer_budget);
    integer("packer.default_importance", c.packer_default_importance);
    real("reviewer.threshold", c.reviewer_threshold);
    integer("reviewer.batch_size", c.reviewer_batch_size);
    integer("reviewer.excerpt_chars", c.reviewer_excerpt_chars);
    path("extraction.template", c.extraction_template);
    integer("extraction.accept_overall", c.extraction_accept_overall);
    integer("extraction.max_iter", c.extraction_max_iter);
    integer("extraction.mask_batch", c.extraction_mask_batch);
    real("eval.abs_tol", c.eval_abs_tol);
    real("eval.rel_tol", c.eval_rel_tol);
    real("eval.rel_tol_level3", c.eval_rel_tol_level3);
    setters["analysis.seed"] = [&c](const std::string& k, const std::string& v) {
        auto parsed = text::parse_int(v);
        if (!parsed || *parsed < 0) fail(Errc::config_invalid, k + ": expected a non-negative integer");
        c.analysis_seed = *parsed;
    };
    integer("max_concurrency", c.max_concurrency);

    std::set<std::string> seen;
    int line_no = 0;
    for (const auto& raw : text::split_lines(content)) {
        ++line_no;
        auto line = text::trim(raw);
        if (line.empty() || line.front() == '#') continue;
        auto eq = line.find('=');
        auto where = "config line " + std::to_string(line_no) + ": ";
        if (eq == std::string_view::npos) fail(Errc::config_invalid, where + "expected 'key = value'");
        std::string key(text::trim(line.substr(0, eq)));
        std::string value(text::trim(line.substr(eq + 1)));
        auto it = setters.find(key);
        if (it == setters.end()) fail(Errc::config_invalid, where + "unknown key '" + key + "'");
        if (!seen.insert(key).second) fail(Errc::config_invalid, where + "duplicate key '" + key + "'");
        it->second(key, value);
    }
    validate(c);
    return c;
}

inline Config load(const std::filesystem::path& file) {
    if (!std::filesystem::is_regular_file(file)) fail(Errc::config_invalid, "config file not found: " + file.string());
    return parse(text::read_file(file), std::filesystem::absolute(file).parent_path());
}

// Every key with its effective value, sorted; parse(render(c)) == c.
inline std::string render(const Config& c) {
    std::map<std::string, std::string> kv = {
        {"field", c.field},
        {"provider.kind", c.provider_kind},
        {"provider.script", c.provider_script},
        {"provider.base_url", c.provider_base_url},
        {"provider.model", c.provider_model},
        {"provider.vision_model", c.provider_vision_model},
        {"provider.api_key_env", c.provider_api_key_env},
        {"provider.max_in_flight", std::to_string(c.provider_max_in_flight)},
        {"provider.retries", std::to_string(c.provider_retries)},
        {"provider.timeout_s", std::to_string(c.provider_timeout_s)},
        {"collector.sources", c.collector_sources},
        {"collector.max_results", std::to_string(c.collector_max_results)},
        {"collector.crossref_base", c.collector_crossref_base},
        {"collector.arxiv_base", c.collector_arxiv_base},
        {"collector.mailto", c.collector_mailto},
        {"packer.budget", std::to_string(c.packer_budget)},
        {"packer.default_importance", std::to_string(c.packer_default_importance)},
        {"reviewer.threshold", fmt::format("{}", c.reviewer_threshold)},
        {"reviewer.batch_size", std::to_string(c.reviewer_batch_size)},
        {"reviewer.excerpt_chars", std::to_string(c.reviewer_excerpt_chars)},
        {"extraction.template", c.extraction_template},
        {"extraction.accept_overall", std::to_string(c.extraction_accept_overall)},
        {"extraction.max_iter", std::to_string(c.extraction_max_iter)},
        {"extraction.mask_batch", std::to_string(c.extraction_mask_batch)},
        {"eval.abs_tol", fmt::format("{}", c.eval_abs_tol)},
        {"eval.rel_tol", fmt::format("{}", c.eval_rel_tol)},
        {"eval.rel_tol_level3", fmt::format("{}", c.eval_rel_tol_level3)},
        {"analysis.seed", std::to_string(c.analysis_seed)},
        {"max_concurrency", std::to_string(c.max_concurrency)},
    };
    std::string out;
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    return out;
}

// Keys that only tune throughput or credentials do not invalidate a workspace.
inline std::string digest(const Config& c) {
    Config d = c;
    d.provider_max_in_flight = 0;
    d.provider_retries = 0;
    d.provider_timeout_s = 0;
    d.provider_api_key_env.clear();
    d.max_concurrency = 0;
    return digest::sha256(render(d));
}

}  // namespace manalyzer::config
