#pragma once

// Stage orchestration over a workspace: collect, ingest, pack, review, screen,
// extract, analyze, report. Every stage persists its outputs and advances the
// manifest before the next one starts, so a stopped run resumes where it left off.

#include "manalyzer/analysis.hpp"
#include "manalyzer/collector.hpp"
#include "manalyzer/config.hpp"
#include "manalyzer/extraction.hpp"
#include "manalyzer/gateway.hpp"
#include "manalyzer/http.hpp"
#include "manalyzer/log.hpp"
#include "manalyzer/openai_provider.hpp"
#include "manalyzer/packer.hpp"
#include "manalyzer/report.hpp"
#include "manalyzer/reviewer.hpp"
#include "manalyzer/workspace.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdlib>
#include <functional>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace manalyzer::pipeline {

using workspace::Status;

inline const std::vector<std::string>& stage_names() {
    static const std::vector<std::string> names = {"collect", "ingest", "pack",    "review",
                                                   "screen",  "extract", "analyze", "report"};
    return names;
}

inline bool is_stage(const std::string& s) {
    const auto& n = stage_names();
    return std::find(n.begin(), n.end(), s) != n.end();
}

// Errors that say nothing about the document itself; the document keeps its
// status and the stage fails so that a later resume retries it.
inline bool is_infrastructure(Errc code) {
    return code == Errc::transport_failure || code == Errc::provider_refusal || code == Errc::script_miss ||
           code == Errc::io_error || code == Errc::api_unreachable;
}

// Runs fn over items with at most `workers` threads. Returns "<item>: <error>"
// for every item whose fn threw.
inline std::vector<std::string> for_each_parallel(const std::vector<std::string>& items, int workers,
                                                  const std::function<void(const std::string&)>& fn) {
    std::vector<std::string> errors(items.size());
    std::atomic<size_t> next{0};
    auto work = [&] {
        for (size_t i = next++; i < items.size(); i = next++) {
            try {
                fn(items[i]);
            } catch (const std::exception& e) {
                errors[i] = items[i] + ": " + e.what();
            }
        }
    };
    size_t n = std::min(items.size(), static_cast<size_t>(std::max(1, workers)));
    if (n <= 1) {
        work();
    } else {
        std::vector<std::thread> threads;
        for (size_t t = 0; t < n; ++t) threads.emplace_back(work);
        for (auto& t : threads) t.join();
    }
    std::vector<std::string> out;
    for (auto& e : errors)
        if (!e.empty()) out.push_back(std::move(e));
    return out;
}

inline std::shared_ptr<gateway::Provider> make_provider(const config::Config& cfg) {
    if (cfg.provider_kind == "mock") {
        if (cfg.provider_script.empty()) fail(Errc::config_invalid, "provider.kind = mock needs provider.script");
        auto mock = std::make_shared<gateway::ScriptedMock>();
        mock->load_file(cfg.provider_script);
        return mock;
    }
    const char* key = std::getenv(cfg.provider_api_key_env.c_str());
    if (!key || !*key) fail(Errc::config_invalid, "environment variable " + cfg.provider_api_key_env + " is not set");
    gateway::OpenAIOptions options;
    options.base_url = cfg.provider_base_url;
    options.model = cfg.provider_model;
    options.vision_model = cfg.provider_vision_model;
    options.api_key = key;
    return std::make_shared<gateway::OpenAIProvider>(
        options, std::make_shared<http::HttplibClient>(std::chrono::seconds(cfg.provider_timeout_s)));
}

inline gateway::GatewayOptions gateway_options(const config::Config& cfg) {
    gateway::GatewayOptions o;
    o.retries = cfg.provider_retries;
    o.max_in_flight = cfg.provider_max_in_flight;
    return o;
}

struct RunOptions {
    std::string direction;
    bool collect = false;
    std::string ingest_from;
    std::string stop_after;  // empty: run to the end
};

struct Summary {
    std::map<std::string, size_t> counts;  // status name -> documents
    std::string report_path;
};

class Pipeline {
public:
    Pipeline(workspace::Workspace& ws, config::Config cfg, gateway::Gateway& gw,
             std::shared_ptr<http::Client> http = nullptr)
        : ws_(ws), cfg_(std::move(cfg)), gw_(gw), http_(std::move(http)) {}

    // Creates the workspace or checks that it was created with this config.
    void init(const std::string& direction = "") {
        ws_.init(direction, config::digest(cfg_), config::render(cfg_));
    }

    // ------------------------------------------------------------ collect

    void collect(const std::string& direction, int max_papers = 0) {
        require(http_ != nullptr, "collect needs an HTTP client");
        auto keywords = collector::generate_keywords(gw_, direction);
        text::write_file(ws_.path("papers/keywords.json"),
                         nlohmann::json{{"groups", keywords.groups}, {"total", keywords.total}}.dump(2) + "\n");
        collector::CollectorOptions options;
        options.crossref_base = cfg_.collector_crossref_base;
        options.arxiv_base = cfg_.collector_arxiv_base;
        options.mailto = cfg_.collector_mailto;
        collector::Collector c(http_, options);
        std::vector<Source> sources;
        if (cfg_.collector_sources != "arxiv") sources.push_back(Source::crossref);
        if (cfg_.collector_sources != "crossref") sources.push_back(Source::arxiv);
        std::vector<PaperMeta> found;
        size_t failures = 0, queries = 0;
        for (const auto& group : keywords.groups)
            for (auto source : sources) {
                ++queries;
                try {
                    auto hits = c.search(source, text::join(group, " "), cfg_.collector_max_results);
                    found.insert(found.end(), hits.begin(), hits.end());
                } catch (const Error& e) {
                    ++failures;
                    log::warn("search failed: " + std::string(e.what()));
                }
            }
        if (queries > 0 && failures == queries) fail(Errc::stage_failure, "collect: every search failed");
        found = collector::dedup(std::move(found));
        if (max_papers > 0 && found.size() > static_cast<size_t>(max_papers)) found.resize(static_cast<size_t>(max_papers));
        std::vector<std::string> ids;
        std::map<std::string, PaperMeta> by_id;
        for (auto& meta : found) {
            text::write_file(ws_.path("papers/" + meta.doc_id + ".meta.json"), meta_to_json(meta).dump(2) + "\n");
            ws_.add_document(meta.doc_id, meta.title, Status::collected);
            ids.push_back(meta.doc_id);
            by_id[meta.doc_id] = meta;
        }
        for_each_parallel(ids, cfg_.max_concurrency, [&](const std::string& id) {
            try {
                c.download_pdf(by_id.at(id), ws_.path("papers"));
            } catch (const Error& e) {
                log::warn(id + ": " + e.what());
                ws_.note(id, std::string(to_string(e.code())) + ": " + e.what());
            }
        });
        log::info("collected " + std::to_string(ids.size()) + " papers; parse the PDFs externally and ingest them");
    }

    // ------------------------------------------------------------- ingest

    collector::IngestReport ingest(const std::filesystem::path& from) {
        auto report = collector::ingest_directory(from, ws_.root());
        bool added = false;
        for (const auto& doc : report.documents) {
            if (ws_.add_document(doc.meta.doc_id, doc.meta.title, Status::parsed))
                added = true;
            else if (ws_.status(doc.meta.doc_id) == Status::collected) {
                ws_.advance(doc.meta.doc_id, Status::parsed);
                added = true;
            }
        }
        for (const auto& e : report.errors) log::warn("ingest: " + e);
        log::info("ingested " + std::to_string(report.documents.size()) + " documents");
        if (added) {
            ws_.reopen_stage("analyze");
            ws_.reopen_stage("report");
        }
        return report;
    }

    // --------------------------------------------------------------- pack

    void pack() {
        auto ids = ws_.snapshot().with_status(Status::parsed);
        packer::PackOptions options;
        options.budget = cfg_.packer_budget;
        options.default_importance = cfg_.packer_default_importance;
        finish("pack", for_each_parallel(ids, cfg_.max_concurrency, [&](const std::string& id) {
                   auto doc = load_document(ws_.path("parsed/" + id + ".json"));
                   auto packed = packer::pack_document(gw_, doc, options);
                   text::write_file(ws_.path("packed/" + id + ".json"), packer::to_json(packed).dump(2) + "\n");
                   ws_.advance(id, Status::packed);
               }));
    }

    // ------------------------------------------------------------- review

    void review() {
        auto m = ws_.snapshot();
        auto ids = m.with_status(Status::packed);
        finish("review", for_each_parallel(ids, cfg_.max_concurrency, [&](const std::string& id) {
                   auto view = paper_view(id);
                   try {
                       auto scores = reviewer::review_independent(gw_, view, m.direction, cfg_.field);
                       text::write_file(ws_.path("reviews/" + id + ".json"),
                                        nlohmann::json{{"doc_id", id}, {"s1", scores.s1}, {"s2", scores.s2}}.dump(2) + "\n");
                       ws_.advance(id, Status::reviewed);
                   } catch (const Error& e) {
                       if (is_infrastructure(e.code())) throw;
                       log::warn(id + ": unreviewable (" + e.what() + ")");
                       ws_.advance(id, Status::unreviewable, std::string(to_string(e.code())) + ": " + e.what());
                   }
               }));
    }

    // ------------------------------------------------------------- screen

    void screen() {
        auto m = ws_.snapshot();
        auto ids = m.with_status(Status::reviewed);
        if (ids.empty()) return;
        auto batches = reviewer::make_batches(ids, cfg_.reviewer_batch_size);
        std::vector<std::string> batch_keys;
        for (size_t k = 0; k < batches.size(); ++k) batch_keys.push_back(std::to_string(k + 1));
        std::map<std::string, double> s_r;
        std::mutex s_r_mutex;
        finish("screen", for_each_parallel(batch_keys, cfg_.max_concurrency, [&](const std::string& key) {
                   const auto& batch = batches[std::stoul(key) - 1];
                   auto file = ws_.path("reviews/batch-" + key + ".json");
                   std::vector<double> scores;
                   if (std::filesystem::exists(file)) {
                       auto j = nlohmann::json::parse(text::read_file(file));
                       if (j.at("doc_ids").get<std::vector<std::string>>() == batch)
                           scores = j.at("s_r").get<std::vector<double>>();
                   }
                   if (scores.empty()) {
                       std::vector<reviewer::BatchEntry> entries;
                       for (const auto& id : batch) {
                           auto view = paper_view(id);
                           entries.push_back({id, view.title, reviewer::excerpt(view.text, static_cast<size_t>(cfg_.reviewer_excerpt_chars))});
                       }
                       std::string failure;
                       try {
                           scores = reviewer::review_batch(gw_, entries, m.direction, cfg_.reviewer_batch_size, cfg_.field);
                       } catch (const Error& e) {
                           if (is_infrastructure(e.code())) throw;
                           failure = std::string(to_string(e.code())) + ": " + e.what();
                           log::warn("batch " + key + " has no comparative scores, using 0 (" + failure + ")");
                           scores.assign(batch.size(), 0.0);
                       }
                       text::write_file(file, nlohmann::json{{"batch_id", std::stoi(key)}, {"doc_ids", batch},
                                                             {"s_r", scores}, {"failure", failure}}
                                                  .dump(2) + "\n");
                   }
                   std::lock_guard lock(s_r_mutex);
                   for (size_t i = 0; i < batch.size(); ++i) s_r[batch[i]] = scores[i];
               }));

        std::vector<reviewer::ReviewRecord> records;
        for (size_t k = 0; k < batches.size(); ++k)
            for (const auto& id : batches[k]) {
                auto j = nlohmann::json::parse(text::read_file(ws_.path("reviews/" + id + ".json")));
                reviewer::ReviewRecord r;
                r.doc_id = id;
                r.independent = {j.at("s1").get<int>(), j.at("s2").get<int>()};
                r.s_r = s_r.at(id);
                r.final_score = reviewer::fuse(r.independent.s1, r.independent.s2, r.s_r);
                r.kept = r.final_score >= cfg_.reviewer_threshold;
                r.batch_id = static_cast<int>(k + 1);
                records.push_back(r);
            }
        auto all = load_records();
        for (const auto& r : records) all[r.doc_id] = r;
        auto arr = nlohmann::json::array();
        for (const auto& [id, r] : all) arr.push_back(reviewer::to_json(r));
        text::write_file(ws_.path("reviews/records.json"), arr.dump(2) + "\n");
        for (const auto& r : records) ws_.advance(r.doc_id, r.kept ? Status::screened_in : Status::screened_out);
        log::info("screened in " + std::to_string(std::count_if(records.begin(), records.end(),
                                                                [](const auto& r) { return r.kept; })) +
                  " of " + std::to_string(records.size()) + " papers");
    }

    std::map<std::string, reviewer::ReviewRecord> load_records() const {
        std::map<std::string, reviewer::ReviewRecord> out;
        auto file = ws_.path("reviews/records.json");
        if (!std::filesystem::exists(file)) return out;
        for (const auto& j : nlohmann::json::parse(text::read_file(file))) {
            auto r = reviewer::record_from_json(j);
            out[r.doc_id] = r;
        }
        return out;
    }

    // ------------------------------------------------------------ extract

    std::vector<std::string> template_columns() const {
        if (cfg_.extraction_template.empty())
            fail(Errc::config_invalid, "extraction.template is not set");
        return extraction::parse_template(text::read_file(cfg_.extraction_template));
    }

    void extract() {
        auto m = ws_.snapshot();
        std::vector<std::string> ids;
        for (auto s : {Status::screened_in, Status::extracted})
            for (auto& id : m.with_status(s)) ids.push_back(id);
        std::sort(ids.begin(), ids.end());
        if (ids.empty()) return;
        auto columns = template_columns();
        extraction::LoopOptions loop;
        loop.max_iter = cfg_.extraction_max_iter;
        loop.accept_overall = cfg_.extraction_accept_overall;
        loop.tolerance = {cfg_.eval_abs_tol, cfg_.eval_rel_tol};
        loop.field = cfg_.field;
        finish("extract", for_each_parallel(ids, cfg_.max_concurrency, [&](const std::string& id) {
                   auto dir = "extracted/" + id + "/";
                   try {
                       if (ws_.status(id) == Status::screened_in) {
                           auto doc = load_document(ws_.path("parsed/" + id + ".json"));
                           auto conversion = extraction::convert_document(gw_, doc, ws_.root(), cfg_.field);
                           auto scores = extraction::mask_parts(gw_, conversion.parts, m.direction,
                                                                cfg_.extraction_mask_batch, cfg_.field);
                           auto parts = nlohmann::json::array();
                           for (size_t i = 0; i < conversion.parts.size(); ++i) {
                               auto j = extraction::to_json(conversion.parts[i]);
                               j["relevance"] = scores[i];
                               j["retained"] = scores[i] > 0.5;
                               parts.push_back(j);
                           }
                           text::write_file(ws_.path(dir + "parts.json"),
                                            nlohmann::json{{"parts", parts}, {"skipped", conversion.skipped}}.dump(2) + "\n");
                           ws_.advance(id, Status::extracted);
                       }
                       auto stored = nlohmann::json::parse(text::read_file(ws_.path(dir + "parts.json")));
                       std::vector<extraction::ConvertedPart> kept;
                       for (const auto& j : stored.at("parts"))
                           if (j.at("retained").get<bool>()) kept.push_back(extraction::part_from_json(j));
                       auto result = kept.empty() ? extraction::empty_result(columns)
                                                  : extraction::run_feedback_loop(gw_, kept, columns, m.direction, loop);
                       result.table.doc_id = id;
                       auto trace = nlohmann::json::array();
                       for (const auto& t : result.trace) trace.push_back(extraction::to_json(t));
                       text::write_file(ws_.path(dir + "table.json"), extraction::to_json(result.table).dump(2) + "\n");
                       text::write_file(ws_.path(dir + "trace.json"),
                                        nlohmann::json{{"accepted", result.accepted}, {"trace", trace}}.dump(2) + "\n");
                       ws_.advance(id, result.accepted ? Status::accepted : Status::unaccepted);
                   } catch (const Error& e) {
                       if (is_infrastructure(e.code())) throw;
                       log::warn(id + ": extraction failed (" + e.what() + ")");
                       ws_.advance(id, Status::extraction_failed, std::string(to_string(e.code())) + ": " + e.what());
                   }
               }));
    }

    // ------------------------------------------------------------ analyze

    analysis::MergedTable merged_table() const {
        auto m = ws_.snapshot();
        std::vector<extraction::ExtractedTable> tables;
        for (auto s : {Status::accepted, Status::analyzed})
            for (const auto& id : m.with_status(s))
                tables.push_back(extraction::table_from_json(
                    nlohmann::json::parse(text::read_file(ws_.path("extracted/" + id + "/table.json")))));
        return analysis::merge_tables(std::move(tables), template_columns());
    }

    void analyze() {
        auto m = ws_.snapshot();
        auto newly_accepted = m.with_status(Status::accepted);
        if (m.stage_done("analyze") && newly_accepted.empty()) return;
        auto merged = merged_table();
        auto merged_text = analysis::merged_tsv(merged);
        text::write_file(ws_.path("analysis/merged.tsv"), merged_text);
        // A plan made for this exact merged table is reused, so a resumed run
        // issues no second planning call.
        auto plan_file = ws_.path("analysis/plan.json");
        auto merged_digest = digest::sha256(merged_text);
        analysis::Plan plan;
        bool reuse = false;
        if (std::filesystem::exists(plan_file)) {
            auto j = nlohmann::json::parse(text::read_file(plan_file));
            if (j.value("merged_digest", "") == merged_digest) {
                reuse = true;
                for (const auto& step : j.at("steps")) plan.push_back(analysis::step_from_json(step));
            }
        }
        if (!reuse && !merged.rows.empty()) {
            try {
                plan = analysis::plan_analysis(gw_, merged, m.direction, cfg_.field);
            } catch (const Error& e) {
                if (e.code() != Errc::no_valid_steps && e.code() != Errc::precondition) throw;
                log::warn("no analysis plan: " + std::string(e.what()));
            }
        }
        auto steps = nlohmann::json::array();
        for (const auto& s : plan) steps.push_back(analysis::to_json(s));
        text::write_file(plan_file, nlohmann::json{{"merged_digest", merged_digest}, {"steps", steps}}.dump(2) + "\n");
        auto results = analysis::run_analysis(plan, merged, static_cast<uint64_t>(cfg_.analysis_seed));
        analysis::write_artifacts(results, ws_.root());
        auto arr = nlohmann::json::array();
        for (const auto& r : results) arr.push_back(analysis::to_json(r));
        text::write_file(ws_.path("analysis/results.json"), arr.dump(2) + "\n");
        for (const auto& id : newly_accepted) ws_.advance(id, Status::analyzed);
        ws_.complete_stage("analyze");
        ws_.reopen_stage("report");
    }

    // ------------------------------------------------------------- report

    report::ReportInput report_input() const {
        auto m = ws_.snapshot();
        report::ReportInput in;
        in.topic = m.direction;
        in.collected = m.documents.size();
        in.threshold = cfg_.reviewer_threshold;
        in.template_columns = template_columns();
        for (const auto& [id, e] : m.documents) {
            auto s = e.status();
            if (s == Status::unreviewable) ++in.unreviewable;
            if (workspace::rank(s) < 4 || s == Status::screened_out) continue;
            ++in.screened_in;
            report::StudySummary st;
            st.doc_id = id;
            st.title = e.title;
            if (std::filesystem::exists(ws_.path("parsed/" + id + ".json"))) {
                auto doc = load_document(ws_.path("parsed/" + id + ".json"));
                st.doi = doc.meta.doi.value_or("");
            }
            auto table_file = ws_.path("extracted/" + id + "/table.json");
            if (std::filesystem::exists(table_file)) {
                auto t = extraction::table_from_json(nlohmann::json::parse(text::read_file(table_file)));
                st.rows = t.rows.size();
                st.values = t.value_count();
                st.provenance = t.provenance.size();
            }
            auto trace_file = ws_.path("extracted/" + id + "/trace.json");
            if (std::filesystem::exists(trace_file))
                st.iterations = static_cast<int>(nlohmann::json::parse(text::read_file(trace_file)).at("trace").size());
            st.accepted = s == Status::accepted || s == Status::analyzed;
            in.studies.push_back(st);
        }
        in.merged = merged_table();
        auto results_file = ws_.path("analysis/results.json");
        if (std::filesystem::exists(results_file))
            for (const auto& j : nlohmann::json::parse(text::read_file(results_file)))
                in.results.push_back(analysis::result_from_json(j));
        return in;
    }

    void write_report() {
        if (ws_.snapshot().stage_done("report")) return;
        auto in = report_input();
        auto discussion_file = ws_.path("analysis/discussion.json");
        auto input_digest = digest::sha256(report::results_summary(in));
        bool reuse = false;
        if (std::filesystem::exists(discussion_file)) {
            auto j = nlohmann::json::parse(text::read_file(discussion_file));
            if (j.value("input_digest", "") == input_digest) {
                in.discussion = j.value("text", "");
                reuse = true;
            }
        }
        if (!reuse) {
            in.discussion = report::write_discussion(gw_, in, cfg_.field);
            text::write_file(discussion_file,
                             nlohmann::json{{"input_digest", input_digest}, {"text", in.discussion}}.dump(2) + "\n");
        }
        text::write_file(ws_.path("report.md"), report::render_report(in));
        ws_.complete_stage("report");
        log::info("report written to " + ws_.path("report.md").string());
    }

    // ---------------------------------------------------------------- run

    Summary run(const RunOptions& options) {
        require(options.stop_after.empty() || is_stage(options.stop_after), "unknown stage '" + options.stop_after + "'");
        init(options.direction);
        auto direction = ws_.snapshot().direction;
        if (direction.empty()) fail(Errc::empty_direction, "no research direction; pass --direction");
        auto stop = [&](const std::string& stage) { return options.stop_after == stage; };
        if (options.collect) collect(direction);
        if (stop("collect")) return summary();
        if (!options.ingest_from.empty()) ingest(options.ingest_from);
        if (stop("ingest")) return summary();
        pack();
        if (stop("pack")) return summary();
        review();
        if (stop("review")) return summary();
        screen();
        if (stop("screen")) return summary();
        extract();
        if (stop("extract")) return summary();
        analyze();
        if (stop("analyze")) return summary();
        write_report();
        return summary();
    }

    Summary summary() const {
        Summary s;
        auto m = ws_.snapshot();
        for (auto st : workspace::kAllStatuses) s.counts[std::string(workspace::to_string(st))] = 0;
        for (const auto& [id, e] : m.documents) ++s.counts[std::string(workspace::to_string(e.status()))];
        if (std::filesystem::exists(ws_.path("report.md"))) s.report_path = ws_.path("report.md").string();
        return s;
    }

private:
    reviewer::PaperView paper_view(const std::string& id) const {
        auto doc = load_document(ws_.path("parsed/" + id + ".json"));
        auto packed = packer::packed_from_json(nlohmann::json::parse(text::read_file(ws_.path("packed/" + id + ".json"))));
        reviewer::PaperView view{id, doc.meta.title, packer::packed_text(doc, packed), {}};
        for (const auto& f : doc.figures) view.captions.push_back(f.id + ": " + f.caption);
        for (const auto& t : doc.tables) view.captions.push_back(t.id + ": " + t.caption);
        return view;
    }

    void finish(const std::string& stage, const std::vector<std::string>& errors) {
        if (errors.empty()) return;
        for (const auto& e : errors) log::warn(stage + ": " + e);
        fail(Errc::stage_failure, stage + " failed for " + std::to_string(errors.size()) + " item(s); first: " +
                                      errors.front() + ". Fix the cause and run 'resume'.");
    }

    workspace::Workspace& ws_;
    config::Config cfg_;
    gateway::Gateway& gw_;
    std::shared_ptr<http::Client> http_;
};

}  // namespace manalyzer::pipeline
