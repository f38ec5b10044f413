#include "semsplat/query_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace semsplat {

QuerySpec::QuerySpec(const Embedding& query, std::span<const Embedding> canonical, double threshold)
    : query_(query.normalized()), threshold_(threshold) {
    if (query.dim() == 0 || query.is_zero()) throw std::invalid_argument("query embedding must be non-zero");
    if (canonical.empty()) throw std::invalid_argument("at least one canonical embedding is required");
    if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("threshold must lie in (0,1)");
    canonical_.reserve(canonical.size());
    for (const Embedding& c : canonical) {
        if (c.dim() != query.dim()) throw std::invalid_argument("canonical embedding dimension mismatch");
        if (c.is_zero()) throw std::invalid_argument("canonical embeddings must be non-zero");
        canonical_.push_back(c.normalized());
    }
}

double relevancy(std::span<const Embedding> views, const QuerySpec& q) {
    double best = 0.0;
    bool any = false;
    for (const Embedding& view : views) {
        if (view.is_zero()) continue;
        const double a = dot(view, q.query());
        double worst = std::numeric_limits<double>::infinity();
        for (const Embedding& canon : q.canonical()) worst = std::min(worst, pairwise_relevancy(a, dot(view, canon)));
        best = any ? std::max(best, worst) : worst;
        any = true;
    }
    return any ? best : 0.0;
}

RelevancyMap::RelevancyMap(int width, int height, std::vector<double> scores)
    : width_(width), height_(height), scores_(std::move(scores)) {
    if (scores_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
        throw std::invalid_argument("relevancy map: score count does not match dimensions");
}

FeatureMap query_features(const RenderOutput& render) {
    FeatureMap out = render.feature;
    const Vec3f bg = MemoryBank::background();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const float a = render.alpha[i];
        out[i] = a < kCoverageThreshold ? bg : Vec3f(out[i] / a);
    }
    return out;
}

namespace {

std::vector<double> per_entry_scores(const SnappedMap& snapped, const MemoryBank& bank, const QuerySpec& q) {
    if (q.dim() != bank.dim()) throw std::invalid_argument("query dimension does not match the bank");
    std::vector<double> scores(bank.size(), 0.0);
    for (std::int32_t e : snapped.unique) scores[e] = relevancy(bank.entry(e).views, q);
    return scores;
}

}  // namespace

RelevancyMap relevancy_map(const SnappedMap& snapped, const MemoryBank& bank, const QuerySpec& q) {
    const std::vector<double> per_entry = per_entry_scores(snapped, bank, q);
    std::vector<double> scores(snapped.entry.size());
    std::transform(snapped.entry.begin(), snapped.entry.end(), scores.begin(), [&](std::int32_t e) {
        return e == kBackgroundEntry ? 0.0 : per_entry[static_cast<std::size_t>(e)];
    });
    return RelevancyMap(snapped.width, snapped.height, std::move(scores));
}

RelevancyMap relevancy_map(const FeatureMap& fm, const MemoryBank& bank, const QuerySpec& q,
                           const SnapOptions& options) {
    return relevancy_map(snap_map(fm, bank, options), bank, q);
}

Pixel localize(const RelevancyMap& rm) {
    const auto scores = rm.scores();
    if (scores.empty()) throw std::invalid_argument("localize: empty relevancy map");
    // max_element returns the first maximum.
    const auto it = std::max_element(scores.begin(), scores.end());
    const auto index = static_cast<int>(it - scores.begin());
    return Pixel{index % rm.width(), index / rm.width()};
}

std::vector<std::uint8_t> segment(const RelevancyMap& rm, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("threshold must lie in (0,1)");
    std::vector<std::uint8_t> mask(rm.scores().size());
    std::transform(rm.scores().begin(), rm.scores().end(), mask.begin(),
                   [threshold](double s) { return static_cast<std::uint8_t>(s > threshold ? 1 : 0); });
    return mask;
}

ClassMap segment_multiclass(const SnappedMap& snapped, const MemoryBank& bank,
                            std::span<const QuerySpec> queries) {
    if (queries.empty()) throw std::invalid_argument("segment_multiclass: need at least one query");
    std::vector<std::vector<double>> per_query;
    per_query.reserve(queries.size());
    for (const QuerySpec& q : queries) per_query.push_back(per_entry_scores(snapped, bank, q));

    std::vector<std::uint16_t> entry_class(bank.size(), 0);
    for (std::int32_t e : snapped.unique) {
        std::size_t best = 0;
        for (std::size_t qi = 1; qi < queries.size(); ++qi) {
            if (per_query[qi][e] > per_query[best][e]) best = qi;
        }
        entry_class[e] = static_cast<std::uint16_t>(best + 1);
    }

    ClassMap out{snapped.width, snapped.height, std::vector<std::uint16_t>(snapped.entry.size())};
    std::transform(snapped.entry.begin(), snapped.entry.end(), out.classes.begin(), [&](std::int32_t e) {
        return e == kBackgroundEntry ? std::uint16_t{0} : entry_class[static_cast<std::size_t>(e)];
    });
    return out;
}

ClassMap segment_multiclass(const FeatureMap& fm, const MemoryBank& bank,
                            std::span<const QuerySpec> queries, const SnapOptions& options) {
    return segment_multiclass(snap_map(fm, bank, options), bank, queries);
}

RelevancyStats relevancy_stats(const RelevancyMap& rm, double threshold) {
    RelevancyStats stats;
    const auto scores = rm.scores();
    if (scores.empty()) return stats;
    const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
    stats.min = *lo;
    stats.max = *hi;
    double sum = 0.0;
    for (double s : scores) {
        sum += s;
        if (s > threshold) ++stats.above_threshold;
    }
    stats.mean = sum / static_cast<double>(scores.size());
    return stats;
}

}  // namespace semsplat
