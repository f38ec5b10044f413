#include "semsplat/mask_association.hpp"
#include "semsplat/rng.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>

using namespace semsplat;

namespace {

/// One 1x1 view whose K replicates carry `labels`.
std::uint16_t vote_pixel(const std::vector<std::uint16_t>& labels) {
    std::vector<LabelMap> maps;
    for (auto l : labels) maps.emplace_back(1, 1, l);
    return vote(ReplicatedSequence(1, static_cast<int>(labels.size()), std::move(maps))).front().at(0, 0);
}

LabelMap random_map(int w, int h, SplitMix64& rng, const std::vector<std::uint16_t>& alphabet) {
    LabelMap m(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) m.set(x, y, alphabet[rng.below(alphabet.size())]);
    return m;
}

}  // namespace

TEST(Vote, StrictMajority) { EXPECT_EQ(vote_pixel({3, 3, 3, 7, 7}), 3); }

TEST(Vote, TieGoesToSmallestLabel) {
    EXPECT_EQ(vote_pixel({3, 3, 7, 7}), 3);
    EXPECT_EQ(vote_pixel({7, 7, 3, 3}), 3);
    EXPECT_EQ(vote_pixel({9, 0, 9, 0}), 0);
    EXPECT_EQ(vote_pixel({5, 4, 6}), 4);
}

TEST(Vote, UnanimousReplicatesReproduceTheMap) {
    SplitMix64 rng(1);
    const LabelMap m = random_map(7, 5, rng, {0, 5, 9, 300});
    std::vector<LabelMap> maps(5, m);
    EXPECT_EQ(vote(ReplicatedSequence(1, 5, maps)).front(), m);
}

TEST(Vote, RejectsMismatchedInputs) {
    EXPECT_THROW(ReplicatedSequence(2, 2, std::vector<LabelMap>(3, LabelMap(2, 2))), SceneError);
    EXPECT_THROW(ReplicatedSequence(1, 2, {LabelMap(2, 2), LabelMap(3, 2)}), SceneError);
}

TEST(Vote, PermutingReplicatesChangesNothing) {
    SplitMix64 rng(2);
    std::vector<LabelMap> maps;
    for (int k = 0; k < 5; ++k) maps.push_back(random_map(16, 16, rng, {0, 2, 4, 8}));
    const auto base = vote(ReplicatedSequence(1, 5, maps));
    for (int round = 0; round < 10; ++round) {
        for (std::size_t i = maps.size() - 1; i > 0; --i) std::swap(maps[i], maps[rng.below(i + 1)]);
        EXPECT_EQ(vote(ReplicatedSequence(1, 5, maps)), base);
    }
}

TEST(Vote, NeverInventsLabels) {
    SplitMix64 rng(3);
    std::vector<LabelMap> maps;
    for (int k = 0; k < 4; ++k) maps.push_back(random_map(9, 9, rng, {1, 2, 3, 4, 5, 6}));
    const auto out = vote(ReplicatedSequence(1, 4, maps)).front();
    for (int y = 0; y < 9; ++y) {
        for (int x = 0; x < 9; ++x) {
            const bool seen = std::any_of(maps.begin(), maps.end(), [&](const LabelMap& m) { return m.at(x, y) == out.at(x, y); });
            EXPECT_TRUE(seen);
        }
    }
}

TEST(Compact, FirstAppearanceOrder) {
    const LabelMap m(3, 1, std::vector<std::uint16_t>{0, 42, 7});
    const auto c = compact_labels(std::vector{LabelMap(3, 1, std::vector<std::uint16_t>{0, 7, 42})});
    EXPECT_EQ(c.count, 2);
    EXPECT_EQ(c.table, (std::map<std::uint16_t, std::uint16_t>{{0, 0}, {7, 1}, {42, 2}}));
    EXPECT_EQ(c.maps.front().labels()[2], 2);
    EXPECT_EQ(compact_labels(std::vector{m}).table.at(42), 1);
}

TEST(Compact, ContiguousLabelsAreIdentity) {
    const auto c = compact_labels(std::vector{LabelMap(3, 1, std::vector<std::uint16_t>{0, 1, 2})});
    EXPECT_EQ(c.table, (std::map<std::uint16_t, std::uint16_t>{{0, 0}, {1, 1}, {2, 2}}));
}

TEST(Compact, DisjointLabelSetsAcrossViews) {
    const auto c = compact_labels(std::vector{LabelMap(2, 2, 5), LabelMap(2, 2, 9)});
    EXPECT_EQ(c.count, 2);
    EXPECT_EQ(c.table.at(5), 1);
    EXPECT_EQ(c.table.at(9), 2);
    EXPECT_EQ(c.maps[1].at(1, 1), 2);
}

TEST(Compact, IsIdempotent) {
    SplitMix64 rng(4);
    std::vector<LabelMap> maps{random_map(8, 8, rng, {0, 900, 13, 77}), random_map(8, 8, rng, {0, 13, 4000})};
    const auto once = compact_labels(maps);
    const auto twice = compact_labels(once.maps);
    EXPECT_EQ(twice.maps, once.maps);
    EXPECT_EQ(twice.count, once.count);
}

TEST(Consistency, SingleLabelPixelCount) {
    LabelMap m(5, 2, 0);
    for (int x = 0; x < 5; ++x) {
        m.set(x, 0, 3);
        m.set(x, 1, 3);
    }
    const auto r = consistency_report(std::vector{m});
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r.at(3).pixels, std::vector<std::size_t>{10});
}

TEST(Consistency, LabelPresentInOneView) {
    const auto r = consistency_report(std::vector{LabelMap(2, 2, 1), LabelMap(2, 2, 0)});
    EXPECT_TRUE(r.at(1).present_in(0));
    EXPECT_FALSE(r.at(1).present_in(1));
}

TEST(Consistency, MatchesBruteForceHistogram) {
    SplitMix64 rng(5);
    std::vector<LabelMap> maps;
    for (int v = 0; v < 3; ++v) maps.push_back(random_map(13, 11, rng, {0, 1, 2, 3, 4}));
    const auto r = consistency_report(maps);
    for (std::uint16_t label = 1; label <= 4; ++label) {
        for (std::size_t v = 0; v < maps.size(); ++v) {
            const auto labels = maps[v].labels();
            const auto n = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
            const std::size_t got = r.count(label) ? r.at(label).pixels[v] : 0;
            EXPECT_EQ(got, n);
        }
    }
    EXPECT_EQ(r.count(0), 0u);
}
