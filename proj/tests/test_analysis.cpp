#include "manalyzer/analysis.hpp"
#include "manalyzer/report.hpp"

#include "fn_provider.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace manalyzer;
using namespace manalyzer::analysis;
using manalyzer::testing::FnProvider;
using manalyzer::testing::TempDir;

namespace {

extraction::ExtractedTable table(std::string id, std::vector<std::string> header,
                                 std::vector<std::vector<numeric::Cell>> rows) {
    extraction::ExtractedTable t;
    t.doc_id = std::move(id);
    t.header = std::move(header);
    t.rows = std::move(rows);
    return t;
}

MergedTable make_merged(std::vector<std::string> columns, const std::vector<std::vector<numeric::Cell>>& rows) {
    MergedTable m;
    m.columns = std::move(columns);
    for (size_t i = 0; i < rows.size(); ++i) m.rows.push_back({fmt::format("d{:03}", i), rows[i]});
    return m;
}

gateway::Gateway gateway_for(std::shared_ptr<FnProvider> p) { return gateway::Gateway(p); }

}  // namespace

TEST(Merge, ConcatenatesInDocOrderAndKeepsMissing) {
    std::vector<std::string> cols{"a", "b"};
    auto m = merge_tables({table("p2", cols, {{1.0, std::nullopt}, {2.0, 3.0}, {4.0, 5.0}}),
                           table("p1", cols, {{6.0, 7.0}, {std::nullopt, 8.0}})},
                          cols);
    ASSERT_EQ(m.row_count(), 5u);
    EXPECT_EQ(m.header(), (std::vector<std::string>{"doc_id", "a", "b"}));
    EXPECT_EQ(m.rows[0].doc_id, "p1");
    EXPECT_EQ(m.rows[1].cells[0], std::nullopt);
    EXPECT_EQ(m.rows[2].doc_id, "p2");
    EXPECT_EQ(m.rows[2].cells[1], std::nullopt);
    EXPECT_EQ(m.missing_count, 2u);
}

TEST(Merge, EmptyInputAndHeaderMismatch) {
    auto m = merge_tables({}, {"a"});
    EXPECT_EQ(m.row_count(), 0u);
    EXPECT_EQ(m.header(), (std::vector<std::string>{"doc_id", "a"}));
    EXPECT_ERRC(merge_tables({table("p1", {"x"}, {{1.0}})}, {"a"}), Errc::header_mismatch);
}

TEST(Merge, InputOrderDoesNotMatter) {
    std::vector<std::string> cols{"v"};
    std::vector<extraction::ExtractedTable> tables;
    for (int i = 0; i < 8; ++i)
        tables.push_back(table("p" + std::to_string(i), cols, {{double(i)}, {double(i * 10)}}));
    auto reference = merge_tables(tables, cols);
    std::mt19937 rng(7);
    for (int s = 0; s < 10; ++s) {
        std::shuffle(tables.begin(), tables.end(), rng);
        EXPECT_EQ(merge_tables(tables, cols), reference);
    }
}

TEST(Profile, DiscreteNeedsIntegralValuesAndTwoToTenClasses) {
    auto m = make_merged({"label", "x", "many"}, {{1.0, 0.5, 1.0}, {2.0, 1.5, 2.0}, {1.0, 2.5, 3.0}});
    auto p = profile(m);
    EXPECT_TRUE(p[0].discrete);
    EXPECT_FALSE(p[1].discrete);
    EXPECT_TRUE(p[2].discrete);
    std::vector<std::vector<numeric::Cell>> rows;
    for (int i = 0; i < 11; ++i) rows.push_back({double(i)});
    EXPECT_FALSE(profile(make_merged({"c"}, rows))[0].discrete);
}

TEST(Plan, ParsesAllThreeSteps) {
    auto provider = std::make_shared<FnProvider>([](const gateway::AgentRequest&) {
        return std::string("```json\n{\"steps\": [\n"
                           "{\"kind\": \"clustering\", \"features\": [\"pm25\", \"no2\"], \"k\": 2, \"title\": \"C\"},\n"
                           "{\"kind\": \"classification\", \"features\": [\"pm25\"], \"label\": \"region\", \"title\": \"K\"},\n"
                           "{\"kind\": \"regression\", \"feature\": \"no2\", \"response\": \"pm25\", \"title\": \"R\"}\n"
                           "]}\n```");
    });
    auto gw = gateway_for(provider);
    auto m = make_merged({"pm25", "no2", "region"}, {{50.0, 30.0, 1.0}, {60.0, 35.0, 2.0}, {70.0, 40.0, 1.0}});
    auto plan = plan_analysis(gw, m, "PM2.5");
    ASSERT_EQ(plan.size(), 3u);
    EXPECT_EQ(plan[0].kind, Kind::clustering);
    EXPECT_EQ(plan[0].k, 2);
    EXPECT_EQ(plan[1].label, "region");
    EXPECT_EQ(plan[2].features, std::vector<std::string>{"no2"});
    EXPECT_EQ(plan[2].response, "pm25");
    EXPECT_EQ(provider->count(gateway::Tag::plan), 1u);
}

TEST(Plan, GhostColumnStepIsReplacedByDefault) {
    auto provider = std::make_shared<FnProvider>([](const gateway::AgentRequest&) {
        return std::string("{\"steps\": [{\"kind\": \"regression\", \"feature\": \"ozone\", \"response\": \"pm25\"}]}");
    });
    auto gw = gateway_for(provider);
    auto m = make_merged({"pm25", "no2"}, {{50.5, 30.2}, {60.1, 35.7}, {70.3, 41.9}});
    auto plan = plan_analysis(gw, m, "PM2.5");
    for (const auto& s : plan)
        for (const auto& f : s.features) EXPECT_NE(f, "ozone");
    ASSERT_EQ(plan.size(), 2u);  // clustering and regression; nothing is discrete
    EXPECT_EQ(plan[0].kind, Kind::clustering);
    EXPECT_EQ(plan[1].kind, Kind::regression);
}

TEST(Plan, DegradesWithTheSchema) {
    auto provider = std::make_shared<FnProvider>([](const gateway::AgentRequest&) { return std::string("{\"steps\": []}"); });
    auto gw = gateway_for(provider);
    struct Case {
        std::vector<std::string> cols;
        std::vector<std::vector<numeric::Cell>> rows;
        std::vector<Kind> kinds;
        bool regression_on_index;
    };
    std::vector<Case> cases = {
        {{"y"}, {{1.5}, {2.5}, {4.0}}, {Kind::clustering, Kind::regression}, true},
        {{"x", "y"}, {{1.5, 2.5}, {2.5, 3.5}, {4.0, 1.5}}, {Kind::clustering, Kind::regression}, false},
        {{"g", "y"}, {{1.0, 2.5}, {2.0, 3.5}, {1.0, 1.5}}, {Kind::clustering, Kind::classification, Kind::regression}, false},
        {{"g"}, {{1.0}, {2.0}, {1.0}}, {Kind::clustering, Kind::regression}, true},
        {{"x", "y"}, {{1.5, 5.0}, {2.5, 5.0}, {std::nullopt, 5.0}}, {Kind::clustering, Kind::regression}, true},
    };
    for (const auto& c : cases) {
        auto plan = plan_analysis(gw, make_merged(c.cols, c.rows), "t");
        std::vector<Kind> kinds;
        for (const auto& s : plan) kinds.push_back(s.kind);
        EXPECT_EQ(kinds, c.kinds) << c.cols.size();
        EXPECT_EQ(plan.back().features.empty(), c.regression_on_index);
        auto results = run_analysis(plan, make_merged(c.cols, c.rows));
        EXPECT_EQ(results.size(), plan.size());
    }
}

TEST(Plan, UnparseableAfterReaskAndNoNumericData) {
    auto provider = std::make_shared<FnProvider>([](const gateway::AgentRequest&) { return std::string("no idea"); });
    auto gw = gateway_for(provider);
    auto m = make_merged({"y"}, {{1.0}, {2.0}});
    EXPECT_ERRC(plan_analysis(gw, m, "t"), Errc::no_valid_steps);
    EXPECT_EQ(provider->count(gateway::Tag::plan), 2u);
    auto empty = make_merged({"y"}, {{std::nullopt}});
    EXPECT_ERRC(plan_analysis(gw, empty, "t"), Errc::precondition);
}

TEST(Toolkit, LeastSquaresRecoversExactLine) {
    std::vector<double> x, y;
    for (int i = 0; i < 10; ++i) {
        x.push_back(i);
        y.push_back(2.0 * i + 1.0);
    }
    auto fit = least_squares(x, y);
    ASSERT_TRUE(fit);
    EXPECT_NEAR(fit->slope, 2.0, 1e-12);
    EXPECT_NEAR(fit->intercept, 1.0, 1e-12);
    EXPECT_NEAR(fit->r2, 1.0, 1e-12);
}

TEST(Toolkit, LeastSquaresMatchesRawSumsFormula) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> x, y;
        for (int i = 0; i < 30; ++i) {
            x.push_back(noise(rng) * 5);
            y.push_back(0.7 * x.back() - 3 + noise(rng));
        }
        long double n = x.size(), sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (size_t i = 0; i < x.size(); ++i) {
            sx += x[i];
            sy += y[i];
            sxx += (long double)x[i] * x[i];
            sxy += (long double)x[i] * y[i];
        }
        long double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        long double intercept = (sy - slope * sx) / n;
        auto fit = least_squares(x, y);
        ASSERT_TRUE(fit);
        EXPECT_NEAR(fit->slope, (double)slope, 1e-9);
        EXPECT_NEAR(fit->intercept, (double)intercept, 1e-9);
    }
}

TEST(Toolkit, LeastSquaresDegenerate) {
    EXPECT_FALSE(least_squares({1.0}, {2.0}));
    EXPECT_FALSE(least_squares({1.0, 1.0, 1.0}, {1.0, 2.0, 3.0}));
    EXPECT_FALSE(least_squares({1.0, 2.0, 3.0}, {4.0, 4.0, 4.0}));
}

TEST(Toolkit, KMeansSeparatesTwoBlobs) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> noise(0.0, 0.5);
    std::vector<std::vector<double>> points;
    for (int i = 0; i < 50; ++i) points.push_back({noise(rng), noise(rng)});
    for (int i = 0; i < 50; ++i) points.push_back({10 + noise(rng), 10 + noise(rng)});
    auto km = kmeans(points, 2, 42);
    std::vector<int> sizes(2, 0);
    for (int a : km.assignment) ++sizes[static_cast<size_t>(a)];
    EXPECT_EQ(sizes, (std::vector<int>{50, 50}));
    for (int i = 1; i < 50; ++i) EXPECT_EQ(km.assignment[static_cast<size_t>(i)], km.assignment[0]);
    EXPECT_LE(km.iterations, 100);
}

TEST(Toolkit, KMeansIsDeterministicAndLocallyOptimal) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::vector<double>> points;
        for (int i = 0; i < 40; ++i) points.push_back({u(rng), u(rng), u(rng)});
        auto a = kmeans(points, 3, 42);
        auto b = kmeans(points, 3, 42);
        EXPECT_EQ(a.assignment, b.assignment);
        EXPECT_EQ(a.centers, b.centers);
        if (a.iterations < 100)
            for (size_t i = 0; i < points.size(); ++i) {
                double own = squared_distance(points[i], a.centers[static_cast<size_t>(a.assignment[i])]);
                for (const auto& c : a.centers) EXPECT_LE(own, squared_distance(points[i], c));
            }
    }
}

TEST(Toolkit, NearestNeighbourMatchesBruteForce) {
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> coord(0, 5), label(0, 2);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<std::vector<double>> x;
        std::vector<int> y;
        for (int i = 0; i < 15; ++i) {
            x.push_back({double(coord(rng)), double(coord(rng))});
            y.push_back(label(rng));
        }
        auto predicted = loo_nearest_neighbour(x, y);
        for (size_t i = 0; i < x.size(); ++i) {
            size_t best = i == 0 ? 1 : 0;
            for (size_t j = 0; j < x.size(); ++j)
                if (j != i && squared_distance(x[i], x[j]) < squared_distance(x[i], x[best])) best = j;
            EXPECT_EQ(predicted[i], y[best]);
        }
    }
}

TEST(Run, ListwiseDeletionAndDegenerateSteps) {
    auto m = make_merged({"g", "y"}, {{1.0, 2.0}, {1.0, std::nullopt}, {1.0, 4.0}, {1.0, 7.0}});
    Plan plan = {{Kind::classification, {"y"}, "g", "", 3, "cls"},
                 {Kind::regression, {}, "", "y", 3, "reg"},
                 {Kind::clustering, {"y"}, "", "", 5, "clu"}};
    auto results = run_analysis(plan, m);
    ASSERT_EQ(results.size(), 3u);
    EXPECT_TRUE(results[0].skipped);  // identical labels
    EXPECT_FALSE(results[1].skipped);
    EXPECT_EQ(results[1].excluded_rows, 1u);
    EXPECT_EQ(results[1].used_rows, 3u);
    EXPECT_TRUE(results[2].skipped);  // 3 rows for k = 5
    EXPECT_EQ(results[1].tsv_header[1], "row_index");
    EXPECT_EQ(results[1].tsv_rows[1][1], "2");  // the merged row position survives deletion
}

TEST(Run, ArtifactsAreWritten) {
    TempDir dir;
    auto m = make_merged({"x", "y"}, {{1.0, 3.0}, {2.0, 5.0}, {3.0, 7.5}, {4.0, 9.0}});
    Plan plan = {{Kind::regression, {"x"}, "", "y", 3, "reg"}, {Kind::clustering, {"x", "y"}, "", "", 2, "clu"}};
    write_artifacts(run_analysis(plan, m), dir.path());
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "analysis" / "step1_regression.tsv"));
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "analysis" / "step2_clustering.json"));
    auto j = nlohmann::json::parse(text::read_file(dir.path() / "analysis" / "step1_regression.json"));
    EXPECT_EQ(j["artifact"], "analysis/step1_regression.tsv");
}

namespace {

report::ReportInput sample_input() {
    report::ReportInput in;
    in.topic = "PM2.5 in Chinese cities";
    in.collected = 4;
    in.screened_in = 2;
    in.template_columns = {"x", "y"};
    in.studies = {{"p1", "Study one", "10.1/a", 2, 4, 4, 1, true}, {"p2", "Study two", "", 2, 3, 3, 2, true}};
    in.merged = merge_tables({table("p1", {"x", "y"}, {{1.0, 3.0}, {2.0, 5.0}}),
                              table("p2", {"x", "y"}, {{3.0, 7.5}, {4.0, std::nullopt}})},
                             {"x", "y"});
    in.results = run_analysis({{Kind::regression, {"x"}, "", "y", 3, "y against x"}}, in.merged);
    in.discussion = "# Findings\nLevels fell.";
    return in;
}

}  // namespace

TEST(Report, SectionsInOrderWithFiguresAndProvenance) {
    auto md = report::render_report(sample_input());
    auto methods = md.find("\n## Methods\n"), results = md.find("\n## Results\n"),
         discussion = md.find("\n## Discussion\n"), references = md.find("\n## References\n");
    ASSERT_NE(methods, std::string::npos);
    EXPECT_LT(methods, results);
    EXPECT_LT(results, discussion);
    EXPECT_LT(discussion, references);
    EXPECT_EQ(md.rfind("# Meta-Analysis Report: PM2.5 in Chinese cities\n", 0), 0u);
    EXPECT_NE(md.find("![Figure 1: y against x](analysis/step1_regression.tsv)"), std::string::npos);
    EXPECT_NE(md.find("| p1 | Study one | 2 | 4 | 4 | 1 | yes |"), std::string::npos);
    EXPECT_NE(md.find("**Findings**"), std::string::npos);
    EXPECT_EQ(md.find("\n# Findings"), std::string::npos);
    EXPECT_NE(md.find("1 rows with missing values were excluded"), std::string::npos);
    EXPECT_EQ(report::render_report(sample_input()), md);
}

TEST(Report, EmptyCorpusSaysNoUsableStudies) {
    report::ReportInput in;
    in.topic = "t";
    in.template_columns = {"x"};
    in.merged = merge_tables({}, {"x"});
    auto md = report::render_report(in);
    EXPECT_NE(md.find("No usable studies"), std::string::npos);
    EXPECT_NE(md.find("## References"), std::string::npos);
}

TEST(Report, DiscussionFromReporterAgent) {
    auto provider = std::make_shared<FnProvider>([](const gateway::AgentRequest& r) {
        EXPECT_NE(manalyzer::testing::last_text(r).find("Step 1"), std::string::npos);
        return std::string("Concentrations declined.");
    });
    auto gw = gateway_for(provider);
    EXPECT_EQ(report::write_discussion(gw, sample_input()), "Concentrations declined.");
}
