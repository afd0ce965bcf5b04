// Writes the bundled synthetic corpus: parse files, images, template, gold
// files, config, and a mock script recorded from a rule-based responder.
//
//   make_synthetic_corpus <out-dir>

#include "manalyzer/eval.hpp"
#include "manalyzer/pipeline.hpp"

#include <zlib.h>

#include <fmt/format.h>

#include <cstdio>
#include <iostream>

using namespace manalyzer;

namespace {

const std::string kDirection = "PM2.5 pollution trends in Chinese cities";
const std::vector<std::string> kColumns = {"Year", "PM2.5 (ug/m3)", "PM10 (ug/m3)", "NO2 (ug/m3)", "Region code"};

struct Row {
    int year;
    double pm25, pm10, no2;
};

struct Paper {
    std::string id, title, doi, city;
    int region = 0;  // 1 north, 2 south; 0 for off-topic papers
    std::vector<Row> rows;
    int s1, s2;
    double s_r;
    std::string body;  // off-topic papers only
};

std::vector<Paper> papers() {
    return {
        {"syn-01", "Fine particulate matter trends in Beijing after the 2013 action plan", "10.5555/syn.0001", "Beijing", 1,
         {{2013, 89.5, 108.1, 56.0}, {2015, 80.6, 101.5, 50.3}, {2017, 58.0, 84.2, 46.1}}, 9, 8, 0.9, ""},
        {"syn-02", "Heavy haze in Shijiazhuang: annual PM2.5 and PM10 records", "10.5555/syn.0002", "Shijiazhuang", 1,
         {{2014, 124.3, 206.7, 52.8}, {2016, 99.1, 164.0, 48.5}}, 8, 8, 0.85, ""},
        {"syn-03", "Particulate pollution in Shanghai under regional transport", "10.5555/syn.0003", "Shanghai", 2,
         {{2013, 62.0, 82.4, 48.2}, {2015, 53.1, 69.5, 46.0}, {2016, 45.2, 59.0, 43.3}}, 9, 9, 0.95, ""},
        {"syn-04", "Air quality improvement in Guangzhou, southern China", "10.5555/syn.0004", "Guangzhou", 2,
         {{2014, 49.0, 70.3, 52.5}, {2017, 35.1, 56.4, 52.0}}, 8, 7, 0.8, ""},
        {"syn-05", "Dust and combustion aerosols in Xi'an", "10.5555/syn.0005", "Xi'an", 1,
         {{2015, 57.9, 117.2, 49.6}, {2016, 71.4, 139.8, 55.2}}, 7, 8, 0.7, ""},
        {"syn-06", "Basin meteorology and PM2.5 accumulation in Chengdu", "10.5555/syn.0006", "Chengdu", 2,
         {{2013, 96.1, 150.3, 62.7}, {2017, 56.2, 88.4, 53.1}}, 8, 8, 0.6, ""},
        {"syn-07", "Ozone episodes in the Los Angeles basin", "10.5555/syn.0007", "", 0, {}, 4, 6, 0.2,
         "Summer ozone exceedances in Los Angeles were driven by photochemistry and stagnant sea-breeze circulation."},
        {"syn-08", "Heavy metals in agricultural soils of Hunan", "10.5555/syn.0008", "", 0, {}, 3, 7, 0.1,
         "Cadmium and lead in paddy soils were sampled across rice-growing counties and compared with soil standards."},
        {"syn-09", "Indoor PM2.5 exposure from solid-fuel cooking in rural Guizhou", "10.5555/syn.0009", "", 0, {}, 8, 8,
         0.45, "Kitchen concentrations were logged during cooking in village households that burn coal and wood."},
        {"syn-10", "Satellite aerosol optical depth over the Yangtze River Delta", "10.5555/syn.0010", "", 0, {}, 7, 7, 0.5,
         "Aerosol optical depth retrievals were compared with sun photometer observations over coastal cities."},
    };
}

bool on_topic(const Paper& p) { return p.region != 0; }

std::string num(double v) { return fmt::format("{}", v); }

std::string value_paragraph(const Paper& p) {
    std::string s = p.city + " is classified as region " + std::to_string(p.region) +
                    " in this study. The annual mean PM2.5 concentration was ";
    for (size_t i = 0; i < p.rows.size(); ++i) {
        if (i) s += i + 1 == p.rows.size() ? " and " : ", ";
        s += num(p.rows[i].pm25) + " ug/m3 in " + std::to_string(p.rows[i].year);
    }
    return s + ".";
}

std::string table_caption(const Paper& p) { return "Table 1: Annual mean PM10 and NO2 in " + p.city + "."; }
std::string figure_caption(const Paper& p) { return "Figure 1: Seasonal cycle of PM2.5 in " + p.city + "."; }

std::string image_table(const Paper& p) {
    markdown::Table t;
    t.header = {"Year", "PM10 (ug/m3)", "NO2 (ug/m3)"};
    for (const auto& r : p.rows) t.rows.push_back({std::to_string(r.year), num(r.pm10), num(r.no2)});
    return markdown::render(t);
}

ParsedDocument parse_file(const Paper& p) {
    ParsedDocument d;
    d.meta.doc_id = p.id;
    d.meta.title = p.title;
    d.meta.doi = p.doi;
    if (!on_topic(p)) {
        d.paragraphs = {{0, p.body}, {1, "The study design and instruments are described in the supplementary material."}};
        return d;
    }
    d.paragraphs = {
        {0, "We examine fine particulate matter in " + p.city + " using records from the national monitoring network."},
        {1, value_paragraph(p)},
        {2, "Concentrations were measured with tapered element oscillating microbalances and quality controlled "
            "following national standards."},
        {3, "Emission controls on coal combustion, industrial boilers and vehicle fleets coincided with the observed "
            "changes, although year to year meteorology modulated the pollution levels in every season and the "
            "relative weight of local and regional sources remains uncertain."},
    };
    d.tables = {{"T1", table_caption(p), "images/" + p.id + "-T1.png"}};
    d.figures = {{"F1", figure_caption(p), "images/" + p.id + "-F1.png"}};
    return d;
}

// -------------------------------------------------------------------- images

void put32(std::string& out, uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<char>((v >> s) & 0xFF));
}

void chunk(std::string& out, const char* type, const std::string& data) {
    put32(out, static_cast<uint32_t>(data.size()));
    std::string body = std::string(type, 4) + data;
    out += body;
    put32(out, static_cast<uint32_t>(crc32(0, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()))));
}

// A small grayscale PNG whose stripe pattern depends on `seed`.
std::string png(unsigned seed) {
    const uint32_t w = 32, h = 16;
    std::string raw;
    for (uint32_t y = 0; y < h; ++y) {
        raw.push_back(0);
        for (uint32_t x = 0; x < w; ++x) raw.push_back(static_cast<char>(((x + seed) / 4 + y / 4) % 2 ? 230 : 40 + (seed * 17) % 150));
    }
    uLongf size = compressBound(static_cast<uLong>(raw.size()));
    std::string z(size, '\0');
    compress(reinterpret_cast<Bytef*>(z.data()), &size, reinterpret_cast<const Bytef*>(raw.data()), static_cast<uLong>(raw.size()));
    z.resize(size);
    std::string out = "\x89PNG\r\n\x1a\n";
    std::string ihdr;
    put32(ihdr, w);
    put32(ihdr, h);
    ihdr += std::string("\x08\x00\x00\x00\x00", 5);
    chunk(out, "IHDR", ihdr);
    chunk(out, "IDAT", z);
    chunk(out, "IEND", "");
    return out;
}

// ----------------------------------------------------------------- responder

std::string all_text(const gateway::AgentRequest& r) {
    std::string s;
    for (const auto& part : r.user_parts) s += (part.is_image() ? part.caption : part.text) + "\n";
    return s;
}

const Paper* by_title(const std::vector<Paper>& ps, const std::string& text) {
    const Paper* best = nullptr;
    for (const auto& p : ps)
        if (text.find(p.title) != std::string::npos) best = &p;
    return best;
}

const Paper* by_city(const std::vector<Paper>& ps, const std::string& text) {
    for (const auto& p : ps)
        if (on_topic(p) && text.find("We examine fine particulate matter in " + p.city + " ") != std::string::npos) return &p;
    for (const auto& p : ps)
        if (on_topic(p) && text.find(" in " + p.city + ".") != std::string::npos) return &p;
    return nullptr;
}

int attempt_of(const std::string& text) {
    auto pos = text.find("(attempt ");
    if (pos == std::string::npos) return 1;
    return std::stoi(text.substr(pos + 9));
}

extraction::ExtractedTable truth(const Paper& p, size_t rows) {
    extraction::ExtractedTable t;
    t.header = kColumns;
    for (size_t i = 0; i < rows; ++i) {
        const auto& r = p.rows[i];
        t.rows.push_back({double(r.year), r.pm25, r.pm10, r.no2, double(p.region)});
    }
    return t;
}

// The paper whose table is hard: a misread cell first, then a dropped row.
const char* kHardPaper = "syn-03";

std::string extraction_reply(const Paper& p, int attempt) {
    size_t rows = p.rows.size();
    std::optional<size_t> misread;
    if (p.id == kHardPaper && attempt == 1) misread = 1;
    if (p.id == kHardPaper && attempt == 2) rows -= 1;
    markdown::Table t;
    t.header = kColumns;
    std::string explanation;
    for (size_t i = 0; i < rows; ++i) {
        const auto& r = p.rows[i];
        double pm10 = misread == i ? 96.5 : r.pm10;
        t.rows.push_back({std::to_string(r.year), num(r.pm25), num(pm10), num(r.no2), std::to_string(p.region)});
        auto row = std::to_string(i + 1);
        explanation += "The number " + std::to_string(r.year) + ": Comes from Part T1, Row " + row + ", Column 1.\n";
        explanation += "The number " + num(r.pm25) + ": Comes from Part P1.\n";
        explanation += "The number " + num(pm10) + ": Comes from Part T1, Row " + row + ", Column 2.\n";
        explanation += "The number " + num(r.no2) + ": Comes from Part T1, Row " + row + ", Column 3.\n";
    }
    explanation += "The number " + std::to_string(p.region) + ": Comes from Part P1.\n";
    return markdown::render(t) + "\n[The Start of Explanation]\n" + explanation + "[The End of Explanation]\n";
}

std::string check_reply(const Paper& p, const std::string& text) {
    auto pos = text.find("Student table");
    auto table = text.substr(text.find(":\n", pos) + 2);
    table = table.substr(0, table.find("\n\n") == std::string::npos ? table.size() : table.find("\n\n"));
    auto expected = extraction::render_table(truth(p, p.rows.size()));
    auto record = [](int a, int s, int c, int o, const std::string& suggestion) {
        return fmt::format("{{\n'Data Accuracy': {},\n'Semantic Consistency': {},\n'Data Completeness': {},\n"
                           "'Overall Score': {},\n'Suggestion': \"{}\"\n}}",
                           a, s, c, o, suggestion);
    };
    if (text::trim(table) == text::trim(expected))
        return record(9, 9, 9, 9, "The table is complete and consistent with the sources.");
    if (std::count(table.begin(), table.end(), '\n') < std::count(expected.begin(), expected.end(), '\n'))
        return record(9, 8, 5, 6, "You should add the missing year from Part P1 and Table 1 to the integrated table.");
    return record(4, 8, 8, 5, "The PM10 value in Row 2 does not match Table 1, Row 2, Column 2; copy it again.");
}

class Responder : public gateway::Provider {
public:
    explicit Responder(std::vector<Paper> ps) : papers_(std::move(ps)) {}
    std::string id() const override { return "synthetic-responder"; }

    gateway::AgentResponse complete(const gateway::AgentRequest& r) override {
        auto text = all_text(r);
        return {reply(r, text), id(), 0};
    }

private:
    std::string reply(const gateway::AgentRequest& r, const std::string& text) {
        using gateway::Tag;
        switch (r.tag) {
            case Tag::paragraph_score:
                return text.find_first_of("0123456789") != std::string::npos ? "9" : "3";
            case Tag::independent_review: {
                const auto* p = by_title(papers_, text);
                if (!p) fail(Errc::script_miss, "responder: unknown paper");
                return fmt::format("The paper was assessed against the topic.\nTopic Relevance: {}\nFeasibility: {}", p->s1, p->s2);
            }
            case Tag::comparative_review: {
                std::vector<std::string> scores;
                for (const auto& line : text::split_lines(text)) {
                    if (line.rfind("Paper ", 0) != 0) continue;
                    const auto* p = by_title(papers_, line);
                    if (!p) fail(Errc::script_miss, "responder: unknown paper in batch");
                    scores.push_back(num(p->s_r));
                }
                return "[" + text::join(scores, ", ") + "]";
            }
            case Tag::table_convert: {
                const auto* p = by_city(papers_, text);
                if (!p) fail(Errc::script_miss, "responder: unknown table");
                return "```markdown\n" + image_table(*p) + "```\n[The Start of Title]\nAnnual mean PM10 and NO2 in " +
                       p->city + ".\n[The End of Title]\n[The Start of Footnote]\nYear: calendar year.\nPM10 (ug/m3): "
                       "annual mean PM10.\nNO2 (ug/m3): annual mean NO2.\n[The End of Footnote]\n";
            }
            case Tag::figure_summary: {
                const auto* p = by_city(papers_, text);
                if (!p) fail(Errc::script_miss, "responder: unknown figure");
                return fmt::format("- Winter mean PM2.5: {} ug/m3\n- Summer mean PM2.5: {} ug/m3",
                                   num(p->rows.front().pm25 * 1.5), num(p->rows.front().pm25 * 0.6));
            }
            case Tag::mask: {
                std::vector<std::string> scores;
                static const std::map<std::string, std::string> by_part = {
                    {"P0", "0.2"}, {"P1", "0.9"}, {"P2", "0.1"}, {"P3", "0.3"}, {"T1", "0.95"}, {"F1", "0.2"}};
                for (const auto& line : text::split_lines(text)) {
                    if (line.rfind("Part ", 0) != 0) continue;
                    auto id = line.substr(line.find('(') + 1);
                    id = id.substr(0, id.find(','));
                    scores.push_back(by_part.at(id));
                }
                return "[" + text::join(scores, ", ") + "]";
            }
            case Tag::extract: {
                const auto* p = by_city(papers_, text);
                if (!p) fail(Errc::script_miss, "responder: unknown extraction");
                return extraction_reply(*p, attempt_of(text));
            }
            case Tag::check: {
                const auto* p = by_city(papers_, text);
                if (!p) fail(Errc::script_miss, "responder: unknown check");
                return check_reply(*p, text);
            }
            case Tag::plan:
                return "```json\n{\"steps\": [\n"
                       "  {\"kind\": \"clustering\", \"features\": [\"PM2.5 (ug/m3)\", \"PM10 (ug/m3)\"], \"k\": 2, "
                       "\"title\": \"City-years grouped by PM2.5 and PM10 levels; axes are the two concentrations.\"},\n"
                       "  {\"kind\": \"classification\", \"features\": [\"PM2.5 (ug/m3)\", \"PM10 (ug/m3)\", \"NO2 (ug/m3)\"], "
                       "\"label\": \"Region code\", \"title\": \"Northern versus southern cities predicted from pollutant levels.\"},\n"
                       "  {\"kind\": \"regression\", \"feature\": \"Year\", \"response\": \"PM2.5 (ug/m3)\", "
                       "\"title\": \"Annual mean PM2.5 against year with the fitted least-squares line.\"}\n"
                       "]}\n```";
            case Tag::report:
                return "Six city studies contributed annual means between 2013 and 2017. PM2.5 declined in most "
                       "cities over the period, and northern cities carried higher PM10 loads than southern ones. "
                       "The synthetic sample is small and the records are annual means without uncertainties, so the "
                       "fitted trend and the cluster split are descriptive only.";
            case Tag::keyword:
                return "[[\"PM2.5\", \"fine particulate matter\"], [\"China\", \"urban air quality\"]]";
        }
        fail(Errc::script_miss, "responder: unhandled tag");
    }

    std::vector<Paper> papers_;
};

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: make_synthetic_corpus <out-dir>\n";
        return 2;
    }
    namespace fs = std::filesystem;
    fs::path out = fs::absolute(argv[1]);
    auto ps = papers();
    try {
        fs::remove_all(out / "corpus");
        unsigned seed = 1;
        for (const auto& p : ps) {
            auto doc = parse_file(p);
            save_document(doc, out / "corpus" / (p.id + ".json"));
            for (const auto* list : {&doc.tables, &doc.figures})
                for (const auto& v : *list) text::write_file(out / "corpus" / v.image, png(seed++));
        }
        text::write_file(out / "template.txt", text::join(kColumns, "\n") + "\n");

        std::vector<eval::GoldPoint> gold;
        std::string screening = "doc_id\tlabel\n";
        for (const auto& p : ps) {
            screening += p.id + "\t" + (on_topic(p) ? "1" : "0") + "\n";
            for (const auto& r : p.rows)
                gold.push_back({p.id, 1, r.pm25, "ug/m3", "annual mean PM2.5 " + std::to_string(r.year), "Atmosphere"});
            for (const auto& r : p.rows) {
                gold.push_back({p.id, 2, r.pm10, "ug/m3", "annual mean PM10 " + std::to_string(r.year), "Atmosphere"});
                gold.push_back({p.id, 2, r.no2, "ug/m3", "annual mean NO2 " + std::to_string(r.year), "Atmosphere"});
            }
        }
        text::write_file(out / "gold_extraction.tsv", "doc_id\tlevel\tvalue\tunit\tlabel\tdomain\n" + eval::serialize_gold(gold));
        text::write_file(out / "gold_screening.tsv", screening);
        text::write_file(out / "direction.txt", kDirection + "\n");
        text::write_file(out / "manalyzer.cfg",
                         "# Synthetic corpus run: scripted replies, small packing budget.\n"
                         "provider.kind = mock\n"
                         "provider.script = script.tsv\n"
                         "extraction.template = template.txt\n"
                         "packer.budget = 120\n"
                         "reviewer.threshold = 8\n"
                         "reviewer.batch_size = 20\n"
                         "analysis.seed = 42\n");

        auto cfg = config::load(out / "manalyzer.cfg");
        auto responder = std::make_shared<Responder>(ps);
        auto recorder = std::make_shared<gateway::RecordingProvider>(responder);
        gateway::Gateway gw(recorder);
        auto scratch = fs::temp_directory_path() / ("manalyzer-synthetic-" + std::to_string(::getpid()));
        fs::remove_all(scratch);
        workspace::Workspace ws(scratch);
        pipeline::Pipeline pipe(ws, cfg, gw);
        auto summary = pipe.run({kDirection, false, (out / "corpus").string(), ""});
        text::write_file(out / "script.tsv", recorder->script());
        for (const auto& [status, n] : summary.counts)
            if (n) std::cout << status << ": " << n << "\n";
        std::cout << "script records written to " << (out / "script.tsv").string() << "\n";
        fs::remove_all(scratch);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
