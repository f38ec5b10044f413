#include "semsplat/query_engine.hpp"
#include "semsplat/synthetic.hpp"

#include "../support/oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace semsplat;

namespace {

Embedding vec(std::vector<float> v) { return Embedding(std::move(v)); }

/// Embeddings in R^3 with prescribed dot products against e_0 (the query).
/// view = (a, s, 0) with s chosen so ||view|| = 1; canon_k = (c_k0, c_k1, c_k2).
QuerySpec query_e0(std::vector<Embedding> canon) { return QuerySpec(vec({1, 0, 0}), canon); }

struct Triple {
    MemoryBank bank;
    FeatureMap map;
    Embedding query;
    std::vector<Embedding> canon;
};

Triple random_triple(std::uint64_t seed) {
    SplitMix64 rng(seed);
    const std::size_t n = 1 + rng.below(60);
    const std::size_t dim = 16;
    const int views = 1 + static_cast<int>(rng.below(3));
    std::vector<LabelMap> maps(static_cast<std::size_t>(views), LabelMap(static_cast<int>(n), 1));
    ViewEmbeddings e;
    for (std::uint16_t l = 1; l <= n; ++l) {
        for (int v = 0; v < views; ++v) {
            maps[static_cast<std::size_t>(v)].set(l - 1, 0, l);
            // About a quarter of (view, label) pairs are left out -> sentinels.
            if (rng.uniform() < 0.75) e.emplace(std::pair{v, l}, synthetic::random_unit(dim, rng));
        }
    }
    MemoryBank bank = build_bank(maps, e, seed, dim);
    FeatureMap fm(40, 30);
    for (auto& f : fm.values()) {
        const double pick = rng.uniform();
        if (pick < 0.1) {
            f = MemoryBank::background();
        } else if (pick < 0.6) {
            f = bank.entry(rng.below(bank.size())).id + Vec3d(rng.uniform(-.1, .1), rng.uniform(-.1, .1), rng.uniform(-.1, .1)).cast<float>();
        } else {
            f = Vec3d(rng.uniform(-0.2, 1.2), rng.uniform(-0.2, 1.2), rng.uniform(-0.2, 1.2)).cast<float>();
        }
    }
    std::vector<Embedding> canon;
    for (int k = 0; k < 4; ++k) canon.push_back(synthetic::random_unit(dim, rng));
    return {std::move(bank), std::move(fm), synthetic::random_unit(dim, rng), std::move(canon)};
}

}  // namespace

TEST(Pairwise, EqualLogitsGiveOneHalf) {
    EXPECT_EQ(pairwise_relevancy(0.3, 0.3), 0.5);
    EXPECT_EQ(pairwise_relevancy(-7.0, -7.0), 0.5);
}

TEST(Pairwise, ShiftInvariance) {
    SplitMix64 rng(1);
    for (int i = 0; i < 1000; ++i) {
        const double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1), c = rng.uniform(-5, 5);
        EXPECT_NEAR(pairwise_relevancy(a + c, b + c), pairwise_relevancy(a, b), 1e-12);
    }
}

TEST(Relevancy, EqualDotsEverywhereGiveOneHalf) {
    // view . query = view . canon_k = 0 for all k.
    const std::vector<Embedding> views{vec({0, 0, 1})};
    EXPECT_DOUBLE_EQ(relevancy(views, query_e0({vec({0, 1, 0}), vec({0, -1, 0})})), 0.5);
}

TEST(Relevancy, MinimumOverCanonicalPhrases) {
    // view = e_0: a = 1; canon dots 0.0 and 0.5 -> min at b = 0.5:
    // 1 / (1 + e^-0.5) = 0.6224593312...
    const std::vector<Embedding> views{vec({1, 0, 0})};
    const auto q = query_e0({vec({0, 1, 0}), vec({0.5f, std::sqrt(0.75f), 0})});
    EXPECT_NEAR(relevancy(views, q), 0.62246, 1e-5);
    EXPECT_NEAR(relevancy(views, q), 1.0 / (1.0 + std::exp(-0.5)), 1e-7);
}

TEST(Relevancy, ZeroSentinelViewsAreSkipped) {
    const auto q = query_e0({vec({0, 1, 0}), vec({0.5f, std::sqrt(0.75f), 0})});
    const std::vector<Embedding> views{vec({1, 0, 0}), Embedding::zeros(3)};
    EXPECT_NEAR(relevancy(views, q), 0.62246, 1e-5);
    const std::vector<Embedding> none{Embedding::zeros(3), Embedding::zeros(3)};
    EXPECT_EQ(relevancy(none, q), 0.0);
}

TEST(Relevancy, MonotoneInQueryAndCanonDots) {
    // View e_0; query (cos t, sin t, 0) -> a = cos t; canon (cos u, 0, sin u) -> b = cos u.
    const std::vector<Embedding> views{vec({1, 0, 0})};
    auto score = [&](double t, double u) {
        const std::vector<Embedding> canon{vec({float(std::cos(u)), 0, float(std::sin(u))})};
        return relevancy(views, QuerySpec(vec({float(std::cos(t)), float(std::sin(t)), 0}), canon));
    };
    double last = -1;
    for (double t = 3.0; t >= 0.0; t -= 0.25) {
        const double s = score(t, 1.0);
        EXPECT_GT(s, last);
        EXPECT_LT(s, 1.0);
        last = s;
    }
    last = 2;
    for (double u = 3.0; u >= 0.0; u -= 0.25) {
        const double s = score(1.0, u);
        EXPECT_LT(s, last);
        last = s;
    }
}

TEST(Relevancy, InvariantUnderPermutations) {
    SplitMix64 rng(2);
    std::vector<Embedding> views, canon;
    for (int i = 0; i < 4; ++i) views.push_back(synthetic::random_unit(12, rng));
    for (int i = 0; i < 5; ++i) canon.push_back(synthetic::random_unit(12, rng));
    const auto q = synthetic::random_unit(12, rng);
    const double base = relevancy(views, QuerySpec(q, canon));
    for (int r = 0; r < 10; ++r) {
        std::reverse(views.begin(), views.end());
        std::rotate(canon.begin(), canon.begin() + 2, canon.end());
        std::swap(views[0], views[r % 4]);
        EXPECT_NEAR(relevancy(views, QuerySpec(q, canon)), base, 1e-15);
    }
}

TEST(QuerySpecChecks, RejectsBadInputs) {
    const std::vector<Embedding> canon{vec({0, 1})};
    EXPECT_THROW(QuerySpec(Embedding::zeros(2), canon), std::invalid_argument);
    EXPECT_THROW(QuerySpec(vec({1, 0}), {}), std::invalid_argument);
    EXPECT_THROW(QuerySpec(vec({1, 0, 0}), canon), std::invalid_argument);
    EXPECT_THROW(QuerySpec(vec({1, 0}), canon, 1.0), std::invalid_argument);
    EXPECT_THROW(QuerySpec(vec({1, 0}), canon, 0.0), std::invalid_argument);
}

TEST(RelevancyMapTest, ConstantMapAtOneId) {
    auto t = random_triple(3);
    const QuerySpec q(t.query, t.canon);
    const FeatureMap fm(5, 4, t.bank.entry(0).id);
    const auto rm = relevancy_map(fm, t.bank, q);
    const double expected = relevancy(t.bank.entry(0).views, q);
    for (double s : rm.scores()) EXPECT_EQ(s, expected);
}

TEST(RelevancyMapTest, AllBackgroundScoresZero) {
    auto t = random_triple(4);
    const auto rm = relevancy_map(FeatureMap(5, 4, MemoryBank::background()), t.bank, QuerySpec(t.query, t.canon));
    for (double s : rm.scores()) EXPECT_EQ(s, 0.0);
}

TEST(RelevancyMapTest, FastPathMatchesPerPixelOracle) {
    for (std::uint64_t seed = 10; seed < 20; ++seed) {
        auto t = random_triple(seed);
        const auto rm = relevancy_map(t.map, t.bank, QuerySpec(t.query, t.canon));
        const auto expected = oracle::relevancy_per_pixel(t.map, t.bank, t.query, t.canon);
        for (std::size_t i = 0; i < expected.size(); ++i) ASSERT_NEAR(rm.scores()[i], expected[i], 1e-6) << "seed " << seed;
    }
}

TEST(Localize, SinglePeak) {
    std::vector<double> s(12, 0.2);
    s[7] = 0.9;
    EXPECT_EQ(localize(RelevancyMap(4, 3, s)), (Pixel{3, 1}));
}

TEST(Localize, UniformMapPicksOrigin) { EXPECT_EQ(localize(RelevancyMap(4, 3, std::vector<double>(12, 0.5))), (Pixel{0, 0})); }

TEST(Localize, MatchesLinearScanAndIgnoresMonotoneTransforms) {
    SplitMix64 rng(5);
    for (int r = 0; r < 50; ++r) {
        std::vector<double> s(30 * 20);
        // Coarse values so ties happen.
        for (double& v : s) v = static_cast<double>(rng.below(50)) / 50.0;
        std::size_t best = 0;
        for (std::size_t i = 1; i < s.size(); ++i)
            if (s[i] > s[best]) best = i;
        const Pixel p = localize(RelevancyMap(30, 20, s));
        EXPECT_EQ(p, (Pixel{static_cast<int>(best % 30), static_cast<int>(best / 30)}));
        std::vector<double> warped(s.size());
        std::transform(s.begin(), s.end(), warped.begin(), [](double v) { return std::exp(3 * v) - 2; });
        EXPECT_EQ(localize(RelevancyMap(30, 20, warped)), p);
    }
}

TEST(Segment, AllBelowThresholdIsEmpty) {
    const auto mask = segment(RelevancyMap(3, 3, std::vector<double>(9, 0.4)), 0.5);
    EXPECT_TRUE(std::all_of(mask.begin(), mask.end(), [](auto m) { return m == 0; }));
}

TEST(Segment, ThresholdIsStrict) {
    const auto mask = segment(RelevancyMap(3, 1, std::vector<double>{0.5, 0.5000001, 0.49}), 0.5);
    EXPECT_EQ(mask, (std::vector<std::uint8_t>{0, 1, 0}));
}

TEST(Segment, MatchesPerPixelComparison) {
    SplitMix64 rng(6);
    std::vector<double> s(400);
    for (double& v : s) v = rng.uniform();
    const auto mask = segment(RelevancyMap(20, 20, s), 0.3);
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(mask[i], s[i] > 0.3 ? 1 : 0);
    EXPECT_THROW(segment(RelevancyMap(20, 20, s), 1.5), std::invalid_argument);
}

TEST(Multiclass, OneQueryLabelsEveryObjectPixel) {
    auto t = random_triple(7);
    const std::vector<QuerySpec> qs{QuerySpec(t.query, t.canon)};
    const auto snapped = snap_map(t.map, t.bank);
    const auto classes = segment_multiclass(snapped, t.bank, qs);
    for (std::size_t i = 0; i < classes.classes.size(); ++i)
        EXPECT_EQ(classes.classes[i], snapped.entry[i] == kBackgroundEntry ? 0 : 1);
}

TEST(Multiclass, OrthogonalQueriesPartitionByObject) {
    // Two objects whose only view embeddings are e_0 and e_1; the queries are
    // exactly those vectors, so object k scores higher for query k.
    const std::size_t dim = 8;
    ViewEmbeddings e;
    e.emplace(std::pair{0, std::uint16_t{1}}, synthetic::basis_embedding(dim, 0));
    e.emplace(std::pair{0, std::uint16_t{2}}, synthetic::basis_embedding(dim, 1));
    LabelMap labels(6, 2, 0);
    for (int x = 0; x < 6; ++x) labels.set(x, 0, x < 3 ? 1 : 2);
    const auto bank = build_bank(std::vector{labels}, e, 9);
    const std::vector<Embedding> canon{synthetic::basis_embedding(dim, 5), synthetic::basis_embedding(dim, 6)};
    const std::vector<QuerySpec> qs{QuerySpec(synthetic::basis_embedding(dim, 0), canon),
                                    QuerySpec(synthetic::basis_embedding(dim, 1), canon)};
    const auto classes = segment_multiclass(label_image(labels, bank), bank, qs);
    EXPECT_EQ(classes.classes, (std::vector<std::uint16_t>{1, 1, 1, 2, 2, 2, 0, 0, 0, 0, 0, 0}));
}

TEST(Multiclass, MatchesPerPixelPerQueryBruteForce) {
    for (std::uint64_t seed = 30; seed < 35; ++seed) {
        auto t = random_triple(seed);
        SplitMix64 rng(seed);
        std::vector<Embedding> queries;
        std::vector<QuerySpec> qs;
        for (int k = 0; k < 3; ++k) {
            queries.push_back(synthetic::random_unit(t.bank.dim(), rng));
            qs.emplace_back(queries.back(), t.canon);
        }
        const auto classes = segment_multiclass(t.map, t.bank, qs);
        for (std::size_t i = 0; i < t.map.size(); ++i) {
            const auto e = oracle::snap(t.map[i], t.bank);
            std::uint16_t expected = 0;
            if (e >= 0) {
                double best = -1;
                for (std::size_t k = 0; k < queries.size(); ++k) {
                    const double s = oracle::relevancy(t.bank.entry(static_cast<std::size_t>(e)).views, queries[k], t.canon);
                    if (s > best) {
                        best = s;
                        expected = static_cast<std::uint16_t>(k + 1);
                    }
                }
            }
            ASSERT_EQ(classes.classes[i], expected);
        }
    }
}

TEST(QueryFeatures, UncoveredPixelsBecomeBackground) {
    RenderOutput r;
    r.feature = FeatureMap(3, 1, Vec3f(0.2f, 0.4f, 0.0f));
    r.rgb = FeatureMap(3, 1);
    r.alpha = {0.0f, 0.4f, 0.5f};
    const auto f = query_features(r);
    EXPECT_EQ(f[0], MemoryBank::background());
    EXPECT_EQ(f[1], MemoryBank::background());
    EXPECT_TRUE(f[2].isApprox(Vec3f(0.4f, 0.8f, 0.0f)));
}

TEST(Stats, Summaries) {
    const auto st = relevancy_stats(RelevancyMap(2, 2, std::vector<double>{0.1, 0.5, 0.7, 0.9}), 0.5);
    EXPECT_DOUBLE_EQ(st.min, 0.1);
    EXPECT_DOUBLE_EQ(st.max, 0.9);
    EXPECT_DOUBLE_EQ(st.mean, 0.55);
    EXPECT_EQ(st.above_threshold, 2u);
}
