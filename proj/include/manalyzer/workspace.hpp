#pragma once

// Workspace layout and the manifest of per-document stage statuses.

#include "manalyzer/error.hpp"
#include "manalyzer/text.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace manalyzer::workspace {

enum class Status {
    collected,
    parsed,
    packed,
    reviewed,
    unreviewable,
    screened_in,
    screened_out,
    extracted,
    extraction_failed,
    accepted,
    unaccepted,
    analyzed,
};

inline constexpr std::array kAllStatuses = {
    Status::collected,   Status::parsed,       Status::packed,            Status::reviewed,
    Status::unreviewable, Status::screened_in, Status::screened_out,      Status::extracted,
    Status::extraction_failed, Status::accepted, Status::unaccepted,      Status::analyzed,
};

inline std::string_view to_string(Status s) {
    switch (s) {
        case Status::collected: return "collected";
        case Status::parsed: return "parsed";
        case Status::packed: return "packed";
        case Status::reviewed: return "reviewed";
        case Status::unreviewable: return "unreviewable";
        case Status::screened_in: return "screened-in";
        case Status::screened_out: return "screened-out";
        case Status::extracted: return "extracted";
        case Status::extraction_failed: return "extraction-failed";
        case Status::accepted: return "accepted";
        case Status::unaccepted: return "unaccepted";
        case Status::analyzed: return "analyzed";
    }
    return "collected";
}

inline std::optional<Status> status_from_string(std::string_view s) {
    for (auto st : kAllStatuses)
        if (to_string(st) == s) return st;
    return std::nullopt;
}

// Position along the pipeline; a status may only move to a higher rank.
// Terminal side branches share the rank of the stage that produced them.
inline int rank(Status s) {
    switch (s) {
        case Status::collected: return 0;
        case Status::parsed: return 1;
        case Status::packed: return 2;
        case Status::reviewed:
        case Status::unreviewable: return 3;
        case Status::screened_in:
        case Status::screened_out: return 4;
        case Status::extracted:
        case Status::extraction_failed: return 5;
        case Status::accepted:
        case Status::unaccepted: return 6;
        case Status::analyzed: return 7;
    }
    return 0;
}

// Statuses after which a document takes no further part in the pipeline.
inline bool is_terminal(Status s) {
    return s == Status::unreviewable || s == Status::screened_out || s == Status::extraction_failed ||
           s == Status::unaccepted || s == Status::analyzed;
}

struct DocumentEntry {
    std::string doc_id;
    std::string title;
    std::vector<Status> history;  // every status the document has held, oldest first
    std::string note;              // last failure message, if any

    Status status() const { return history.back(); }
    bool operator==(const DocumentEntry&) const = default;
};

struct Manifest {
    int version = 1;
    std::string direction;
    std::string config_digest;
    std::map<std::string, DocumentEntry> documents;
    std::vector<std::string> completed_stages;  // stage-level steps: screen, analyze, report

    bool stage_done(const std::string& stage) const {
        return std::find(completed_stages.begin(), completed_stages.end(), stage) != completed_stages.end();
    }
    std::vector<std::string> with_status(Status s) const {
        std::vector<std::string> ids;
        for (const auto& [id, entry] : documents)
            if (entry.status() == s) ids.push_back(id);
        return ids;
    }
    bool operator==(const Manifest&) const = default;
};

inline nlohmann::json to_json(const Manifest& m) {
    nlohmann::json docs = nlohmann::json::object();
    for (const auto& [id, e] : m.documents) {
        std::vector<std::string> history;
        for (auto s : e.history) history.emplace_back(to_string(s));
        docs[id] = {{"title", e.title}, {"status", to_string(e.status())}, {"history", history}, {"note", e.note}};
    }
    return {{"version", m.version},
            {"direction", m.direction},
            {"config_digest", m.config_digest},
            {"documents", docs},
            {"completed_stages", m.completed_stages}};
}

inline Manifest manifest_from_json(const nlohmann::json& j) {
    auto corrupt = [](const std::string& msg) { fail(Errc::corrupt_manifest, "manifest: " + msg); };
    Manifest m;
    try {
        m.version = j.at("version").get<int>();
        m.direction = j.at("direction").get<std::string>();
        m.config_digest = j.at("config_digest").get<std::string>();
        m.completed_stages = j.at("completed_stages").get<std::vector<std::string>>();
        for (const auto& [id, d] : j.at("documents").items()) {
            DocumentEntry e;
            e.doc_id = id;
            e.title = d.at("title").get<std::string>();
            e.note = d.value("note", "");
            for (const auto& s : d.at("history")) {
                auto st = status_from_string(s.get<std::string>());
                if (!st) corrupt(id + ": unknown status '" + s.get<std::string>() + "'");
                if (!e.history.empty() && rank(*st) <= rank(e.history.back()))
                    corrupt(id + ": status regressed from " + std::string(to_string(e.history.back())) + " to " +
                            std::string(to_string(*st)));
                e.history.push_back(*st);
            }
            if (e.history.empty()) corrupt(id + ": empty status history");
            if (d.at("status").get<std::string>() != to_string(e.status()))
                corrupt(id + ": status disagrees with its history");
            m.documents.emplace(id, std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        corrupt(e.what());
    }
    if (m.version != 1) corrupt("unsupported version " + std::to_string(m.version));
    return m;
}

// Owns the on-disk manifest. All mutations go through one mutex and are
// written atomically before the call returns.
class Workspace {
public:
    explicit Workspace(std::filesystem::path root) : root_(std::move(root)) {}

    const std::filesystem::path& root() const { return root_; }
    std::filesystem::path manifest_path() const { return root_ / "manifest.json"; }
    std::filesystem::path config_path() const { return root_ / "config.cfg"; }
    std::filesystem::path path(const std::string& rel) const { return root_ / rel; }

    bool initialized() const { return std::filesystem::is_regular_file(manifest_path()); }

    void init(const std::string& direction, const std::string& config_digest, const std::string& config_text) {
        for (const char* dir : {"papers", "parsed", "packed", "reviews", "extracted", "analysis"})
            std::filesystem::create_directories(root_ / dir);
        std::lock_guard lock(mutex_);
        if (initialized()) {
            manifest_ = load_locked();
            if (manifest_.config_digest != config_digest)
                fail(Errc::refuse_resume, "workspace was created with a different configuration; use the snapshot " +
                                              config_path().string() + " or start a new workspace");
            if (!direction.empty() && !manifest_.direction.empty() && manifest_.direction != direction)
                fail(Errc::refuse_resume, "workspace direction is '" + manifest_.direction + "'");
            if (!direction.empty() && manifest_.direction.empty()) {
                manifest_.direction = direction;
                save_locked();
            }
            return;
        }
        manifest_ = {};
        manifest_.direction = direction;
        manifest_.config_digest = config_digest;
        text::write_file(config_path(), config_text);
        save_locked();
    }

    void open() {
        std::lock_guard lock(mutex_);
        manifest_ = load_locked();
    }

    Manifest snapshot() const {
        std::lock_guard lock(mutex_);
        return manifest_;
    }

    void set_direction(const std::string& direction) {
        std::lock_guard lock(mutex_);
        manifest_.direction = direction;
        save_locked();
    }

    // Adds a document at `status` unless it is already known.
    bool add_document(const std::string& doc_id, const std::string& title, Status status) {
        std::lock_guard lock(mutex_);
        if (manifest_.documents.count(doc_id)) return false;
        manifest_.documents[doc_id] = {doc_id, title, {status}, ""};
        save_locked();
        return true;
    }

    // Moves a document forward; moving to its current status or backwards is a no-op.
    void advance(const std::string& doc_id, Status status, const std::string& note = "") {
        std::lock_guard lock(mutex_);
        auto it = manifest_.documents.find(doc_id);
        require(it != manifest_.documents.end(), "unknown document " + doc_id);
        auto& e = it->second;
        if (rank(status) <= rank(e.status())) return;
        e.history.push_back(status);
        e.note = note;
        save_locked();
    }

    void note(const std::string& doc_id, const std::string& message) {
        std::lock_guard lock(mutex_);
        auto it = manifest_.documents.find(doc_id);
        if (it == manifest_.documents.end()) return;
        it->second.note = message;
        save_locked();
    }

    void complete_stage(const std::string& stage) {
        std::lock_guard lock(mutex_);
        if (manifest_.stage_done(stage)) return;
        manifest_.completed_stages.push_back(stage);
        save_locked();
    }

    // Marks a stage-level step as needing another run (new documents arrived).
    void reopen_stage(const std::string& stage) {
        std::lock_guard lock(mutex_);
        auto& v = manifest_.completed_stages;
        auto it = std::find(v.begin(), v.end(), stage);
        if (it == v.end()) return;
        v.erase(it);
        save_locked();
    }

    std::optional<Status> status(const std::string& doc_id) const {
        std::lock_guard lock(mutex_);
        auto it = manifest_.documents.find(doc_id);
        if (it == manifest_.documents.end()) return std::nullopt;
        return it->second.status();
    }

private:
    Manifest load_locked() const {
        if (!initialized()) fail(Errc::corrupt_manifest, "no manifest at " + manifest_path().string());
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text::read_file(manifest_path()));
        } catch (const nlohmann::json::parse_error& e) {
            fail(Errc::corrupt_manifest, std::string("manifest is not valid JSON: ") + e.what());
        }
        return manifest_from_json(j);
    }

    void save_locked() { text::write_file(manifest_path(), to_json(manifest_).dump(2) + "\n"); }

    std::filesystem::path root_;
    mutable std::mutex mutex_;
    Manifest manifest_;
};

// Status matrix: one line per status with its count, then one line per document.
inline std::string render_status(const Manifest& m) {
    std::map<Status, size_t> counts;
    for (const auto& [id, e] : m.documents) ++counts[e.status()];
    std::string out = "direction: " + (m.direction.empty() ? std::string("-") : m.direction) + "\n";
    out += "documents: " + std::to_string(m.documents.size()) + "\n";
    for (auto s : kAllStatuses) out += fmt::format("{:<18} {}\n", to_string(s), counts[s]);
    out += "completed stages: " + (m.completed_stages.empty() ? std::string("-") : text::join(m.completed_stages, ", ")) + "\n";
    for (const auto& [id, e] : m.documents)
        out += fmt::format("{}\t{}{}\n", id, to_string(e.status()), e.note.empty() ? "" : "\t" + e.note);
    return out;
}

}  // namespace manalyzer::workspace
