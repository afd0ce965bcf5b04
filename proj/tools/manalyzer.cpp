#include "manalyzer/eval.hpp"
#include "manalyzer/pipeline.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <iostream>

using namespace manalyzer;
namespace fs = std::filesystem;

namespace {

struct Globals {
    std::string workspace = "workspace";
    std::string config;
};

config::Config load_config(const Globals& g) {
    if (!g.config.empty()) return config::load(g.config);
    fs::path snapshot = fs::path(g.workspace) / "config.cfg";
    if (fs::is_regular_file(snapshot)) return config::load(snapshot);
    return config::parse("");
}

// Everything a stage command needs, wired from the global flags.
struct Session {
    explicit Session(const Globals& g)
        : cfg(load_config(g)),
          ws(g.workspace),
          gw(pipeline::make_provider(cfg), pipeline::gateway_options(cfg)),
          pipe(ws, cfg, gw, std::make_shared<http::HttplibClient>(std::chrono::seconds(cfg.provider_timeout_s))) {}

    config::Config cfg;
    workspace::Workspace ws;
    gateway::Gateway gw;
    pipeline::Pipeline pipe;
};

void print_summary(const pipeline::Summary& s) {
    for (const auto& [status, n] : s.counts)
        if (n) std::cout << fmt::format("{:<18} {}\n", status, n);
    if (!s.report_path.empty()) std::cout << "report: " << s.report_path << "\n";
}

workspace::Manifest open_manifest(const Globals& g) {
    workspace::Workspace ws(g.workspace);
    ws.open();
    return ws.snapshot();
}

void screen_eval(const Globals& g, const std::string& gold_file) {
    workspace::Workspace ws(g.workspace);
    ws.open();
    auto labels = reviewer::parse_gold_labels(text::read_file(gold_file));
    auto records_file = ws.path("reviews/records.json");
    if (!fs::exists(records_file)) fail(Errc::precondition, "no screening records; run 'screen' first");
    std::set<std::string> corpus, gold, hybrid, independent;
    for (const auto& j : nlohmann::json::parse(text::read_file(records_file))) {
        auto r = reviewer::record_from_json(j);
        if (!labels.count(r.doc_id)) fail(Errc::schema_violation, "no gold label for " + r.doc_id);
        corpus.insert(r.doc_id);
        if (labels.at(r.doc_id)) gold.insert(r.doc_id);
        if (r.kept) hybrid.insert(r.doc_id);
        if (reviewer::baseline_screen(r.independent.s1, r.independent.s2)) independent.insert(r.doc_id);
    }
    auto h = reviewer::classification_metrics(hybrid, gold, corpus);
    auto b = reviewer::classification_metrics(independent, gold, corpus);
    std::cout << "| Method | Accuracy | Precision | Recall | F1 |\n|---|---|---|---|---|\n";
    for (const auto& [name, m] : {std::pair{"hybrid", h}, std::pair{"independent only", b}})
        std::cout << fmt::format("| {} | {:.4f} | {:.4f} | {:.4f} | {:.4f} |\n", name, m.accuracy, m.precision, m.recall, m.f1);
    text::write_file(ws.path("reviews/metrics.json"),
                     nlohmann::json{{"hybrid", reviewer::to_json(h)}, {"independent", reviewer::to_json(b)}}.dump(2) + "\n");
}

void eval_extraction(const Globals& g, const std::string& gold_file) {
    workspace::Workspace ws(g.workspace);
    ws.open();
    auto cfg = load_config(g);
    auto gold = eval::load_gold(gold_file);
    std::map<std::string, std::vector<double>> extracted;
    for (const auto& [id, e] : ws.snapshot().documents) {
        auto file = ws.path("extracted/" + id + "/table.json");
        if (fs::exists(file))
            extracted[id] = extraction::table_from_json(nlohmann::json::parse(text::read_file(file))).values();
    }
    auto results = eval::evaluate(extracted, gold, {cfg.eval_abs_tol, cfg.eval_rel_tol, cfg.eval_rel_tol_level3});
    for (const auto& r : results)
        std::cout << fmt::format("{}\tlevel {}\t{}/{}\t{:.4f}\n", r.doc_id, r.level, r.hits, r.gold_count, r.rate);
    std::cout << "\n" << eval::render_levels(eval::aggregate(results));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"manalyzer: literature screening, data extraction and meta-analysis pipeline"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("-w,--workspace", g.workspace, "workspace directory")->capture_default_str();
    app.add_option("-c,--config", g.config, "configuration file (default: the workspace snapshot)");

    std::string direction, ingest_dir, stop_after, gold;
    int max_papers = 0;
    bool collect_flag = false;

    auto* init = app.add_subcommand("init", "create a workspace");
    init->add_option("-d,--direction", direction, "research direction");
    auto* collect = app.add_subcommand("collect", "search and download papers");
    collect->add_option("-d,--direction", direction, "research direction");
    collect->add_option("-n,--max-papers", max_papers, "cap on collected papers");
    auto* ingest = app.add_subcommand("ingest", "import parsed documents from a directory");
    ingest->add_option("dir", ingest_dir, "directory of parse files")->required();
    auto* pack = app.add_subcommand("pack", "pack documents into the context budget");
    auto* review = app.add_subcommand("review", "independent review of packed documents");
    auto* screen = app.add_subcommand("screen", "comparative review and screening");
    auto* screen_ev = app.add_subcommand("screen-eval", "screening metrics against gold labels");
    screen_ev->alias("eval-screening");
    screen_ev->add_option("--gold", gold, "gold labels file")->required();
    auto* extract = app.add_subcommand("extract", "extract and check data tables");
    auto* analyze = app.add_subcommand("analyze", "plan and run the analysis");
    auto* report = app.add_subcommand("report", "write report.md");
    auto* eval_ex = app.add_subcommand("eval-extraction", "hit rates against gold values");
    eval_ex->add_option("--gold", gold, "gold values file")->required();
    auto* run = app.add_subcommand("run", "run every stage");
    run->add_option("-d,--direction", direction, "research direction");
    run->add_flag("--collect", collect_flag, "search and download before ingesting");
    run->add_option("--ingest", ingest_dir, "directory of parse files to import");
    run->add_option("--stop-after", stop_after, "last stage to run");
    auto* resume = app.add_subcommand("resume", "continue an interrupted run");
    resume->add_option("--stop-after", stop_after, "last stage to run");
    auto* status = app.add_subcommand("status", "print the status matrix");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (status->parsed()) {
            std::cout << workspace::render_status(open_manifest(g));
        } else if (screen_ev->parsed()) {
            screen_eval(g, gold);
        } else if (eval_ex->parsed()) {
            eval_extraction(g, gold);
        } else if (resume->parsed()) {
            if (!workspace::Workspace(g.workspace).initialized())
                fail(Errc::precondition, "nothing to resume in " + g.workspace);
            Session s(g);
            pipeline::RunOptions o;
            o.stop_after = stop_after;
            print_summary(s.pipe.run(o));
        } else if (run->parsed()) {
            Session s(g);
            print_summary(s.pipe.run({direction, collect_flag, ingest_dir, stop_after}));
        } else {
            Session s(g);
            s.pipe.init(init->parsed() || collect->parsed() ? direction : "");
            if (collect->parsed()) {
                auto d = s.ws.snapshot().direction;
                if (d.empty()) fail(Errc::empty_direction, "no research direction; pass --direction");
                s.pipe.collect(d, max_papers);
            } else if (ingest->parsed()) {
                s.pipe.ingest(ingest_dir);
            } else if (pack->parsed()) {
                s.pipe.pack();
            } else if (review->parsed()) {
                s.pipe.review();
            } else if (screen->parsed()) {
                s.pipe.screen();
            } else if (extract->parsed()) {
                s.pipe.extract();
            } else if (analyze->parsed()) {
                s.pipe.analyze();
            } else if (report->parsed()) {
                s.pipe.write_report();
            }
            print_summary(s.pipe.summary());
        }
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
        return e.is_validation() ? 2 : 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
