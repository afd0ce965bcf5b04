#pragma once

// Canonical paper representation: metadata plus the three part lists an
// external OCR parser produces (paragraphs, figures, tables).

#include "manalyzer/error.hpp"
#include "manalyzer/text.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace manalyzer {

enum class Source { crossref, arxiv, local };

inline std::string_view to_string(Source s) {
    switch (s) {
        case Source::crossref: return "crossref";
        case Source::arxiv: return "arxiv";
        case Source::local: return "local";
    }
    return "local";
}

inline std::optional<Source> source_from_string(std::string_view s) {
    if (s == "crossref") return Source::crossref;
    if (s == "arxiv") return Source::arxiv;
    if (s == "local") return Source::local;
    return std::nullopt;
}

struct PaperMeta {
    std::string doc_id;
    std::string title;
    std::optional<std::string> doi;
    Source source = Source::local;
    std::optional<std::string> pdf_url;
    std::string fetched_at;  // ISO-8601 UTC, empty for local documents

    bool operator==(const PaperMeta&) const = default;
};

struct Paragraph {
    int index = 0;
    std::string text;
    bool operator==(const Paragraph&) const = default;
};

// A figure or table: id, caption and a workspace-relative image path.
struct Visual {
    std::string id;
    std::string caption;
    std::string image;
    bool operator==(const Visual&) const = default;
};

struct ParsedDocument {
    PaperMeta meta;
    std::vector<Paragraph> paragraphs;
    std::vector<Visual> figures;
    std::vector<Visual> tables;

    bool operator==(const ParsedDocument&) const = default;
};

inline bool is_safe_doc_id(std::string_view id) {
    if (id.empty() || id == "." || id == "..") return false;
    for (char c : id)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) return false;
    return true;
}

inline nlohmann::json meta_to_json(const PaperMeta& m) {
    nlohmann::json j = {{"doc_id", m.doc_id},
                        {"title", m.title},
                        {"doi", m.doi ? nlohmann::json(*m.doi) : nlohmann::json(nullptr)},
                        {"source", to_string(m.source)},
                        {"pdf_url", m.pdf_url ? nlohmann::json(*m.pdf_url) : nlohmann::json(nullptr)},
                        {"fetched_at", m.fetched_at}};
    return j;
}

inline PaperMeta meta_from_json(const nlohmann::json& j) {
    PaperMeta m;
    m.doc_id = j.at("doc_id").get<std::string>();
    m.title = j.value("title", "");
    if (j.contains("doi") && j["doi"].is_string()) m.doi = j["doi"].get<std::string>();
    m.source = source_from_string(j.value("source", "local")).value_or(Source::local);
    if (j.contains("pdf_url") && j["pdf_url"].is_string()) m.pdf_url = j["pdf_url"].get<std::string>();
    m.fetched_at = j.value("fetched_at", "");
    return m;
}

// Parsed-Document schema. Optional fields (source, pdf_url, fetched_at) are
// written only when they differ from a local document's defaults, so a plain
// parse file serializes back to the same field set.
inline nlohmann::json to_json(const ParsedDocument& doc) {
    nlohmann::json j;
    j["doc_id"] = doc.meta.doc_id;
    j["title"] = doc.meta.title;
    j["doi"] = doc.meta.doi ? nlohmann::json(*doc.meta.doi) : nlohmann::json(nullptr);
    if (doc.meta.source != Source::local) j["source"] = to_string(doc.meta.source);
    if (doc.meta.pdf_url) j["pdf_url"] = *doc.meta.pdf_url;
    if (!doc.meta.fetched_at.empty()) j["fetched_at"] = doc.meta.fetched_at;
    j["paragraphs"] = nlohmann::json::array();
    for (const auto& p : doc.paragraphs) j["paragraphs"].push_back({{"index", p.index}, {"text", p.text}});
    auto visuals = [](const std::vector<Visual>& list) {
        auto arr = nlohmann::json::array();
        for (const auto& v : list) arr.push_back({{"id", v.id}, {"caption", v.caption}, {"image", v.image}});
        return arr;
    };
    j["figures"] = visuals(doc.figures);
    j["tables"] = visuals(doc.tables);
    return j;
}

namespace detail {

[[noreturn]] inline void schema_error(const std::string& field, const std::string& message) {
    fail(Errc::schema_violation, field + ": " + message);
}

inline std::string string_field(const nlohmann::json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key)) schema_error(where + key, "missing");
    if (!j[key].is_string()) schema_error(where + key, "expected a string");
    return j[key].get<std::string>();
}

inline std::vector<Visual> visuals_from_json(const nlohmann::json& j, const std::string& key) {
    std::vector<Visual> out;
    if (!j.contains(key)) schema_error(key, "missing");
    if (!j[key].is_array()) schema_error(key, "expected an array");
    for (size_t i = 0; i < j[key].size(); ++i) {
        const auto& item = j[key][i];
        std::string where = key + "[" + std::to_string(i) + "].";
        if (!item.is_object()) schema_error(where.substr(0, where.size() - 1), "expected an object");
        out.push_back({string_field(item, "id", where), item.contains("caption") ? string_field(item, "caption", where) : "",
                       string_field(item, "image", where)});
    }
    return out;
}

}  // namespace detail

// Structural validation only; image resolution is checked by validate_images.
inline ParsedDocument document_from_json(const nlohmann::json& j) {
    if (!j.is_object()) detail::schema_error("<root>", "expected an object");
    ParsedDocument doc;
    doc.meta.doc_id = detail::string_field(j, "doc_id", "");
    if (!is_safe_doc_id(doc.meta.doc_id))
        detail::schema_error("doc_id", "must be non-empty and use only [A-Za-z0-9._-]");
    doc.meta.title = detail::string_field(j, "title", "");
    if (j.contains("doi") && !j["doi"].is_null()) {
        if (!j["doi"].is_string()) detail::schema_error("doi", "expected a string or null");
        doc.meta.doi = j["doi"].get<std::string>();
    }
    if (j.contains("source")) {
        auto s = source_from_string(j["source"].is_string() ? j["source"].get<std::string>() : "");
        if (!s) detail::schema_error("source", "expected crossref, arxiv or local");
        doc.meta.source = *s;
    }
    if (j.contains("pdf_url") && !j["pdf_url"].is_null()) doc.meta.pdf_url = detail::string_field(j, "pdf_url", "");
    if (j.contains("fetched_at")) doc.meta.fetched_at = detail::string_field(j, "fetched_at", "");
    if (doc.meta.source == Source::arxiv && !doc.meta.pdf_url)
        detail::schema_error("pdf_url", "required for arxiv documents");

    if (!j.contains("paragraphs")) detail::schema_error("paragraphs", "missing");
    if (!j["paragraphs"].is_array()) detail::schema_error("paragraphs", "expected an array");
    for (size_t i = 0; i < j["paragraphs"].size(); ++i) {
        const auto& item = j["paragraphs"][i];
        std::string where = "paragraphs[" + std::to_string(i) + "]";
        if (!item.is_object()) detail::schema_error(where, "expected an object");
        if (!item.contains("index") || !item["index"].is_number_integer())
            detail::schema_error(where + ".index", "expected an integer");
        int index = item["index"].get<int>();
        if (index != static_cast<int>(i))
            detail::schema_error(where + ".index", "expected " + std::to_string(i) + ", got " + std::to_string(index) +
                                                       " (indices must be contiguous from 0)");
        doc.paragraphs.push_back({index, detail::string_field(item, "text", where + ".")});
    }
    doc.figures = detail::visuals_from_json(j, "figures");
    doc.tables = detail::visuals_from_json(j, "tables");

    std::set<std::string> ids;
    for (const auto* list : {&doc.figures, &doc.tables})
        for (const auto& v : *list) {
            if (v.id.empty()) detail::schema_error("figures/tables", "empty id");
            if (!ids.insert(v.id).second) detail::schema_error("figures/tables", "duplicate id '" + v.id + "'");
        }
    return doc;
}

// Every image value must be a relative path, stay inside the workspace and
// name an existing regular file.
inline void validate_images(const ParsedDocument& doc, const std::filesystem::path& workspace_root) {
    for (const auto* list : {&doc.figures, &doc.tables})
        for (const auto& v : *list) {
            std::filesystem::path rel(v.image);
            if (v.image.empty() || rel.is_absolute())
                fail(Errc::schema_violation, "image of '" + v.id + "': must be a workspace-relative path");
            for (const auto& piece : rel)
                if (piece == "..")
                    fail(Errc::schema_violation, "image of '" + v.id + "': must not leave the workspace");
            if (!std::filesystem::is_regular_file(workspace_root / rel))
                fail(Errc::dangling_image_reference, "'" + v.id + "' references missing file " + v.image);
        }
}

inline ParsedDocument load_document(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        fail(Errc::schema_violation, path.string() + ": not valid JSON (" + e.what() + ")");
    }
    return document_from_json(j);
}

inline void save_document(const ParsedDocument& doc, const std::filesystem::path& path) {
    text::write_file(path, to_json(doc).dump(2) + "\n");
}

}  // namespace manalyzer
