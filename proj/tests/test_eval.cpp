#include "manalyzer/eval.hpp"

#include "fixtures/matching_oracle.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace manalyzer;
using namespace manalyzer::eval;

namespace {

std::vector<GoldPoint> gold_of(const std::vector<double>& values, int level = 1, std::string doc = "p1") {
    std::vector<GoldPoint> out;
    for (double v : values) out.push_back({doc, level, v, "ug/m3", "value", ""});
    return out;
}

}  // namespace

TEST(Match, SmallExamples) {
    EXPECT_EQ(match_values({1.0, 2.0, 3.0}, {2.0, 4.0}, 0, 0).size(), 1u);
    EXPECT_EQ(match_values({1.999}, {2.0}, 0, 0.01).size(), 1u);
    EXPECT_EQ(match_values({1.999}, {2.0}, 0, 1e-4).size(), 0u);
    EXPECT_ERRC(match_values({1.0}, {1.0}, -1, 0), Errc::precondition);
}

TEST(Match, GreedyWouldFailButAugmentingPathsDoNot) {
    // 1.0 fits both gold values; a greedy pass that gives it to 1.005 strands 1.0.
    auto pairs = match_values({1.0, 1.01}, {1.005, 1.0}, 0.006, 0);
    EXPECT_EQ(pairs.size(), 2u);
}

TEST(Match, EqualsExhaustiveOptimumOn500Instances) {
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 500; ++i) {
        auto m = manalyzer::testing::random_matching_instance(rng);
        auto pairs = match_values(m.extracted, m.gold, m.abs_tol, m.rel_tol);
        ASSERT_EQ(pairs.size(), manalyzer::testing::brute_force_matching(m.extracted, m.gold, m.abs_tol, m.rel_tol))
            << "instance " << i;
        std::vector<bool> e_used(m.extracted.size()), g_used(m.gold.size());
        for (auto [e, g] : pairs) {
            EXPECT_FALSE(e_used[e]);
            EXPECT_FALSE(g_used[g]);
            e_used[e] = g_used[g] = true;
            EXPECT_TRUE(numeric::within_tolerance(m.extracted[e], m.gold[g], m.abs_tol, m.rel_tol));
        }
    }
}

TEST(Match, ToleranceMonotonicity) {
    std::mt19937_64 rng(77);
    for (int i = 0; i < 200; ++i) {
        auto m = manalyzer::testing::random_matching_instance(rng);
        auto base = match_values(m.extracted, m.gold, m.abs_tol, m.rel_tol).size();
        EXPECT_GE(match_values(m.extracted, m.gold, m.abs_tol * 10 + 1e-3, m.rel_tol).size(), base);
        EXPECT_GE(match_values(m.extracted, m.gold, m.abs_tol, m.rel_tol * 10 + 1e-3).size(), base);
    }
}

TEST(HitRateTest, BoundaryCases) {
    std::vector<double> seven{1, 2, 3, 4, 5, 6, 7};
    EXPECT_DOUBLE_EQ(hit_rate(seven, gold_of(seven)).rate, 1.0);
    EXPECT_DOUBLE_EQ(hit_rate({}, gold_of({1.0, 2.0})).rate, 0.0);
    auto dup = hit_rate({5.0, 5.0}, gold_of({5.0}));
    EXPECT_EQ(dup.hits, 1u);
    EXPECT_DOUBLE_EQ(dup.rate, 1.0);
    EXPECT_ERRC(hit_rate({1.0}, {}), Errc::empty_gold);
}

TEST(HitRateTest, LevelThreeUsesWiderTolerance) {
    EXPECT_EQ(hit_rate({101.0}, gold_of({100.0}, 3)).hits, 1u);
    EXPECT_EQ(hit_rate({101.0}, gold_of({100.0}, 1)).hits, 0u);
}

TEST(HitRateTest, RateIsOneIffEveryGoldMatched) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 200; ++i) {
        auto m = manalyzer::testing::random_matching_instance(rng);
        if (m.gold.empty()) continue;
        Tolerance tol{m.abs_tol, m.rel_tol, m.rel_tol};
        auto r = hit_rate(m.extracted, gold_of(m.gold), tol);
        EXPECT_GE(r.rate, 0.0);
        EXPECT_LE(r.rate, 1.0);
        EXPECT_EQ(r.rate == 1.0, r.hits == m.gold.size());
    }
}

TEST(Aggregate, MeansPerLevelAndDomain) {
    std::vector<HitRate> rs = {{"a", 1, "Atmosphere", 1, 1, 1.0}, {"b", 1, "Atmosphere", 0, 2, 0.0},
                               {"c", 2, "Agriculture", 1, 4, 0.25}};
    auto a = aggregate(rs);
    EXPECT_DOUBLE_EQ(a.by_level[1].mean, 0.5);
    EXPECT_DOUBLE_EQ(a.by_level[2].mean, 0.25);
    EXPECT_DOUBLE_EQ(a.by_domain["Atmosphere"][1].mean, 0.5);
    EXPECT_EQ(a.by_domain["Agriculture"].count(1), 0u);
    EXPECT_DOUBLE_EQ(aggregate({rs[2]}).by_level[2].mean, 0.25);
    auto table = render_levels(a);
    EXPECT_NE(table.find("| All | 50.00 | 25.00 | - |"), std::string::npos);
}

TEST(Aggregate, TwentyResultsMatchNaiveSum) {
    std::mt19937_64 rng(13);
    std::uniform_int_distribution<int> level(1, 3), gold(1, 9);
    std::vector<HitRate> rs;
    for (int i = 0; i < 20; ++i) {
        HitRate r;
        r.doc_id = "d" + std::to_string(i);
        r.level = level(rng);
        r.gold_count = static_cast<size_t>(gold(rng));
        r.hits = std::uniform_int_distribution<size_t>(0, r.gold_count)(rng);
        r.rate = static_cast<double>(r.hits) / static_cast<double>(r.gold_count);
        rs.push_back(r);
    }
    auto a = aggregate(rs);
    for (int l = 1; l <= 3; ++l) {
        double sum = 0;
        int n = 0;
        for (const auto& r : rs)
            if (r.level == l) {
                sum += r.rate;
                ++n;
            }
        if (n) EXPECT_NEAR(a.by_level[l].mean, sum / n, 1e-15);
    }
    // duplicating one result moves its level mean as the arithmetic mean predicts
    auto dup = rs;
    dup.push_back(rs[0]);
    auto b = aggregate(dup);
    const auto& before = a.by_level[rs[0].level];
    EXPECT_NEAR(b.by_level[rs[0].level].mean,
                (before.mean * before.documents + rs[0].rate) / (before.documents + 1), 1e-12);
}

TEST(Gold, ParseSerializeAndErrors) {
    std::string content = "p1\t1\t85.2\tug/m3\tannual mean 2013\n"
                          "p1\t2\t-3.5\t%\tchange\tAtmosphere\n"
                          "p2\t3\t1200\tkg\ttotal\n";
    auto points = parse_gold(content);
    ASSERT_EQ(points.size(), 3u);
    EXPECT_EQ(points[1].domain, "Atmosphere");
    EXPECT_EQ(serialize_gold(points), content);
    EXPECT_EQ(parse_gold("doc_id\tlevel\tvalue\tunit\tlabel\n" + content), points);
    try {
        parse_gold("p1\t1\t2\tx\ty\np1\t4\t2\tx\ty\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::schema_violation);
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
    EXPECT_ERRC(parse_gold("p1\t1\tinf\tx\ty\n"), Errc::schema_violation);
    EXPECT_ERRC(parse_gold("p1\t1\t2\n"), Errc::schema_violation);
}

TEST(Gold, EvaluateGroupsByDocumentAndLevel) {
    auto gold = parse_gold("p1\t1\t1\tu\ta\np1\t1\t2\tu\tb\np1\t2\t3\tu\tc\np2\t1\t4\tu\td\n");
    auto rs = evaluate({{"p1", {1.0, 2.0, 3.0}}}, gold);
    ASSERT_EQ(rs.size(), 3u);
    EXPECT_DOUBLE_EQ(rs[0].rate, 1.0);
    EXPECT_DOUBLE_EQ(rs[1].rate, 1.0);
    EXPECT_EQ(rs[2].doc_id, "p2");
    EXPECT_DOUBLE_EQ(rs[2].rate, 0.0);
}
