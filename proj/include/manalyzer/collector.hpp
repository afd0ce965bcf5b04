#pragma once

// Document collector: keyword generation, literature search (Crossref and
// arXiv), PDF download and ingestion of externally parsed documents.

#include "manalyzer/digest.hpp"
#include "manalyzer/document.hpp"
#include "manalyzer/gateway.hpp"
#include "manalyzer/http.hpp"
#include "manalyzer/log.hpp"
#include "manalyzer/prompts.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <ctime>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace manalyzer::collector {

inline std::string utc_now_iso() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// ---------------------------------------------------------------------------
// Keywords

using KeywordGroupList = std::vector<std::vector<std::string>>;

struct KeywordGroups {
    KeywordGroupList groups;
    size_t total = 0;
};

namespace detail {

class ListParser {
public:
    explicit ListParser(std::string_view s) : s_(s) {}

    std::optional<KeywordGroupList> parse() {
        KeywordGroupList groups;
        skip_ws();
        if (!eat('[')) return std::nullopt;
        while (true) {
            skip_ws();
            if (eat(']')) break;
            auto group = parse_group();
            if (!group) return std::nullopt;
            groups.push_back(std::move(*group));
            skip_ws();
            if (eat(',')) continue;
            if (eat(']')) break;
            return std::nullopt;
        }
        return groups;
    }

private:
    std::optional<std::vector<std::string>> parse_group() {
        std::vector<std::string> group;
        if (!eat('[')) return std::nullopt;
        while (true) {
            skip_ws();
            if (eat(']')) return group;
            auto item = parse_string();
            if (!item) return std::nullopt;
            group.push_back(std::move(*item));
            skip_ws();
            if (eat(',')) continue;
            if (eat(']')) return group;
            return std::nullopt;
        }
    }

    // Double- or single-quoted string with backslash escapes.
    std::optional<std::string> parse_string() {
        if (pos_ >= s_.size() || (s_[pos_] != '"' && s_[pos_] != '\'')) return std::nullopt;
        char quote = s_[pos_++];
        std::string out;
        while (pos_ < s_.size()) {
            char c = s_[pos_++];
            if (c == quote) return out;
            if (c == '\\' && pos_ < s_.size()) c = s_[pos_++];
            out.push_back(c);
        }
        return std::nullopt;
    }

    void skip_ws() {
        while (pos_ < s_.size() && text::is_space(s_[pos_])) ++pos_;
    }
    bool eat(char c) {
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    std::string_view s_;
    size_t pos_ = 0;
};

}  // namespace detail

// Accepts a bare list-of-lists or one inside a fenced block.
inline std::optional<KeywordGroupList> parse_keyword_groups(std::string_view reply) {
    auto try_at = [](std::string_view s) -> std::optional<KeywordGroupList> {
        for (size_t open = s.find('['); open != std::string_view::npos; open = s.find('[', open + 1)) {
            if (auto groups = detail::ListParser(s.substr(open)).parse()) return groups;
        }
        return std::nullopt;
    };
    std::optional<KeywordGroupList> groups;
    for (const auto& block : text::fenced_blocks(reply))
        if ((groups = try_at(block))) break;
    if (!groups) groups = try_at(reply);
    if (!groups) return std::nullopt;
    KeywordGroupList cleaned;
    for (auto& group : *groups) {
        std::vector<std::string> kept;
        for (auto& k : group) {
            auto t = text::collapse_whitespace(k);
            if (!t.empty()) kept.push_back(std::move(t));
        }
        if (!kept.empty()) cleaned.push_back(std::move(kept));
    }
    if (cleaned.empty()) return std::nullopt;
    return cleaned;
}

inline KeywordGroups generate_keywords(gateway::Gateway& gw, const std::string& direction) {
    auto topic = text::collapse_whitespace(direction);
    if (topic.empty()) fail(Errc::empty_direction, "research direction is empty");
    gateway::AgentRequest request;
    request.tag = gateway::Tag::keyword;
    request.system_prompt = prompts::keyword_search(topic);
    request.user_parts.push_back(gateway::Part::of_text("Research direction: " + topic));
    constexpr int kMaxReasks = 2;
    for (int attempt = 0; attempt <= kMaxReasks; ++attempt) {
        if (attempt > 0)
            request.user_parts.push_back(gateway::Part::of_text(
                prompts::reask("Reply with only the list of lists of keywords.", attempt + 1)));
        auto reply = gw.complete(request).raw_text;
        if (auto groups = parse_keyword_groups(reply)) {
            KeywordGroups out{std::move(*groups), 0};
            for (const auto& g : out.groups) out.total += g.size();
            if (out.total < 15 || out.total > 30)
                log::info("keyword generation returned " + std::to_string(out.total) + " keywords");
            return out;
        }
        request.user_parts.resize(1);
    }
    fail(Errc::unparseable_reply, "keyword reply is not a list of lists after " + std::to_string(kMaxReasks) +
                                      " re-asks");
}

// ---------------------------------------------------------------------------
// Search

inline std::string normalize_title(std::string_view title) {
    std::string out;
    for (char c : title) {
        unsigned char u = static_cast<unsigned char>(c);
        out.push_back(std::isalnum(u) ? static_cast<char>(std::tolower(u)) : ' ');
    }
    return text::collapse_whitespace(out);
}

inline std::string dedup_key(const PaperMeta& meta) {
    if (meta.doi && !meta.doi->empty()) return "doi:" + text::lower(text::trim(*meta.doi));
    return "title:" + normalize_title(meta.title);
}

inline std::string doc_id_for(const PaperMeta& meta) { return "p-" + digest::sha256(dedup_key(meta)).substr(0, 12); }

// Keeps the first record for each de-dup key, preserving order.
inline std::vector<PaperMeta> dedup(std::vector<PaperMeta> records) {
    std::set<std::string> seen;
    std::vector<PaperMeta> out;
    for (auto& r : records)
        if (seen.insert(dedup_key(r)).second) out.push_back(std::move(r));
    return out;
}

inline std::vector<PaperMeta> parse_crossref(const std::string& body, const std::string& fetched_at) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error&) {
        fail(Errc::malformed_api_response, "crossref response is not JSON");
    }
    if (!j.contains("message") || !j["message"].contains("items") || !j["message"]["items"].is_array())
        fail(Errc::malformed_api_response, "crossref response lacks message.items");
    std::vector<PaperMeta> out;
    for (const auto& item : j["message"]["items"]) {
        if (!item.contains("DOI") || !item["DOI"].is_string()) {
            log::warn("crossref item without DOI skipped");
            continue;
        }
        PaperMeta meta;
        meta.source = Source::crossref;
        meta.doi = item["DOI"].get<std::string>();
        if (item.contains("title") && item["title"].is_array() && !item["title"].empty() &&
            item["title"][0].is_string())
            meta.title = text::collapse_whitespace(item["title"][0].get<std::string>());
        if (item.contains("link") && item["link"].is_array())
            for (const auto& link : item["link"])
                if (link.value("content-type", "") == "application/pdf" && link.contains("URL")) {
                    meta.pdf_url = link["URL"].get<std::string>();
                    break;
                }
        meta.fetched_at = fetched_at;
        meta.doc_id = doc_id_for(meta);
        out.push_back(std::move(meta));
    }
    return out;
}

inline std::vector<PaperMeta> parse_arxiv(const std::string& body, const std::string& fetched_at) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        std::istringstream in(body);
        pt::read_xml(in, tree);
    } catch (const pt::xml_parser_error& e) {
        fail(Errc::malformed_api_response, std::string("arxiv response is not XML: ") + e.what());
    }
    auto feed = tree.get_child_optional("feed");
    if (!feed) fail(Errc::malformed_api_response, "arxiv response lacks <feed>");
    std::vector<PaperMeta> out;
    for (const auto& [name, entry] : *feed) {
        if (name != "entry") continue;
        PaperMeta meta;
        meta.source = Source::arxiv;
        meta.title = text::collapse_whitespace(entry.get<std::string>("title", ""));
        auto id = text::collapse_whitespace(entry.get<std::string>("id", ""));
        if (auto doi = entry.get_optional<std::string>("arxiv:doi")) meta.doi = text::collapse_whitespace(*doi);
        for (const auto& [child_name, child] : entry) {
            if (child_name != "link") continue;
            auto title = child.get<std::string>("<xmlattr>.title", "");
            auto type = child.get<std::string>("<xmlattr>.type", "");
            if (title == "pdf" || type == "application/pdf") {
                meta.pdf_url = child.get<std::string>("<xmlattr>.href", "");
                break;
            }
        }
        if ((!meta.pdf_url || meta.pdf_url->empty()) && id.find("/abs/") != std::string::npos) {
            auto url = id;
            url.replace(url.find("/abs/"), 5, "/pdf/");
            meta.pdf_url = url;
        }
        if (!meta.pdf_url || meta.pdf_url->empty()) {
            log::warn("arxiv entry without a pdf link skipped: " + id);
            continue;
        }
        if (meta.title.empty() && !meta.doi) {
            log::warn("arxiv entry without title skipped: " + id);
            continue;
        }
        meta.fetched_at = fetched_at;
        meta.doc_id = doc_id_for(meta);
        out.push_back(std::move(meta));
    }
    return out;
}

struct CollectorOptions {
    std::string crossref_base = "https://api.crossref.org";
    std::string arxiv_base = "http://export.arxiv.org/api";
    std::string doi_resolver = "https://doi.org";
    std::string mailto;
    std::function<std::string()> clock = utc_now_iso;
};

class Collector {
public:
    Collector(std::shared_ptr<http::Client> client, CollectorOptions options = {})
        : client_(std::move(client)), options_(std::move(options)) {}

    std::string search_url(Source source, const std::string& query, int max_results) const {
        if (source == Source::crossref) {
            auto url = options_.crossref_base + "/works?query=" + http::url_encode(query) +
                       "&rows=" + std::to_string(max_results);
            if (!options_.mailto.empty()) url += "&mailto=" + http::url_encode(options_.mailto);
            return url;
        }
        return options_.arxiv_base + "/query?search_query=" + http::url_encode("all:" + query) +
               "&start=0&max_results=" + std::to_string(max_results);
    }

    // At most max_results de-duplicated records, in API order.
    std::vector<PaperMeta> search(Source source, const std::string& query, int max_results) {
        require(max_results >= 1, "max_results must be >= 1");
        require(source != Source::local, "search source must be crossref or arxiv");
        auto url = search_url(source, query, max_results);
        http::Response response;
        try {
            response = client_->get(url);
        } catch (const Error& e) {
            fail(Errc::api_unreachable, e.what());
        }
        if (response.status != 200)
            fail(Errc::api_unreachable, url + " returned HTTP " + std::to_string(response.status));
        auto fetched_at = options_.clock();
        auto records = source == Source::crossref ? parse_crossref(response.body, fetched_at)
                                                  : parse_arxiv(response.body, fetched_at);
        records = dedup(std::move(records));
        if (records.size() > static_cast<size_t>(max_results)) records.resize(static_cast<size_t>(max_results));
        return records;
    }

    // Stores papers/<doc_id>.pdf plus a .sha256 sidecar. An existing file whose
    // digest matches the sidecar is reused without network access.
    std::filesystem::path download_pdf(const PaperMeta& meta, const std::filesystem::path& papers_dir) {
        require(is_safe_doc_id(meta.doc_id), "doc_id is not filesystem safe");
        std::string url;
        if (meta.pdf_url && !meta.pdf_url->empty())
            url = *meta.pdf_url;
        else if (meta.doi && !meta.doi->empty())
            url = options_.doi_resolver + "/" + *meta.doi;
        else
            fail(Errc::not_downloadable, meta.doc_id + ": no pdf_url and no doi");

        auto pdf = papers_dir / (meta.doc_id + ".pdf");
        auto sidecar = papers_dir / (meta.doc_id + ".sha256");
        std::optional<std::string> recorded;
        if (std::filesystem::exists(sidecar)) recorded = std::string(text::trim(text::read_file(sidecar)));
        if (std::filesystem::exists(pdf)) {
            auto current = digest::sha256_file(pdf);
            if (!recorded) {
                text::write_file(sidecar, current + "\n");
                return pdf;
            }
            if (current == *recorded) return pdf;
        }

        http::Response response;
        try {
            response = client_->get(url);
        } catch (const Error& e) {
            fail(Errc::not_downloadable, meta.doc_id + ": " + e.what());
        }
        if (response.status != 200)
            fail(Errc::not_downloadable, meta.doc_id + ": HTTP " + std::to_string(response.status) + " from " + url);
        if (response.body.rfind("%PDF-", 0) != 0)
            fail(Errc::not_downloadable, meta.doc_id + ": " + url + " did not return a PDF");
        auto fresh = digest::sha256(response.body);
        if (recorded && fresh != *recorded)
            fail(Errc::checksum_mismatch, meta.doc_id + ": downloaded digest " + fresh + " differs from recorded " +
                                              *recorded);
        text::write_file(pdf, response.body);
        text::write_file(sidecar, fresh + "\n");
        ++file_writes_;
        return pdf;
    }

    size_t file_writes() const { return file_writes_.load(); }

private:
    std::shared_ptr<http::Client> client_;
    CollectorOptions options_;
    std::atomic<size_t> file_writes_{0};
};

// ---------------------------------------------------------------------------
// Ingestion

// Validates a parse file against the workspace and persists it under
// parsed/<doc_id>.json. Re-ingesting identical content is a no-op; a
// different document reusing an existing doc_id is rejected.
inline ParsedDocument ingest_parsed(const std::filesystem::path& parse_file, const std::filesystem::path& workspace_root) {
    auto doc = load_document(parse_file);
    validate_images(doc, workspace_root);
    auto target = workspace_root / "parsed" / (doc.meta.doc_id + ".json");
    if (std::filesystem::exists(target)) {
        auto existing = load_document(target);
        if (existing == doc) return doc;
        fail(Errc::schema_violation, "doc_id '" + doc.meta.doc_id + "' already used by a different document");
    }
    save_document(doc, target);
    return doc;
}

struct IngestReport {
    std::vector<ParsedDocument> documents;
    std::vector<std::string> errors;  // "<file>: <message>"
};

// Copies every non-JSON file of `from` into the workspace (same relative
// path), then ingests each *.json parse file in path order.
inline IngestReport ingest_directory(const std::filesystem::path& from, const std::filesystem::path& workspace_root) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(from)) fail(Errc::precondition, from.string() + " is not a directory");
    std::vector<fs::path> parse_files;
    for (const auto& entry : fs::recursive_directory_iterator(from)) {
        if (!entry.is_regular_file()) continue;
        auto rel = fs::relative(entry.path(), from);
        if (entry.path().extension() == ".json") {
            parse_files.push_back(entry.path());
            continue;
        }
        auto dest = workspace_root / rel;
        if (fs::exists(dest) && digest::sha256_file(dest) == digest::sha256_file(entry.path())) continue;
        fs::create_directories(dest.parent_path());
        fs::copy_file(entry.path(), dest, fs::copy_options::overwrite_existing);
    }
    std::sort(parse_files.begin(), parse_files.end());
    IngestReport report;
    for (const auto& file : parse_files) {
        try {
            report.documents.push_back(ingest_parsed(file, workspace_root));
        } catch (const Error& e) {
            report.errors.push_back(fs::relative(file, from).string() + ": " + e.what());
        }
    }
    return report;
}

}  // namespace manalyzer::collector
