#pragma once

#include "semsplat/memory_bank.hpp"
#include "semsplat/rasterizer.hpp"
#include "semsplat/scene_model.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace semsplat {

inline constexpr double kDefaultThreshold = 0.5;
inline const std::array<std::string, 4> kCanonicalPhrases = {"object", "things", "stuff", "texture"};

/// A query embedding plus the canonical (distractor) embeddings it is scored
/// against. All embeddings are stored L2-normalized.
class QuerySpec {
public:
    QuerySpec(const Embedding& query, std::span<const Embedding> canonical,
              double threshold = kDefaultThreshold);

    const Embedding& query() const { return query_; }
    const std::vector<Embedding>& canonical() const { return canonical_; }
    double threshold() const { return threshold_; }
    std::size_t dim() const { return query_.dim(); }

private:
    Embedding query_;
    std::vector<Embedding> canonical_;
    double threshold_;
};

/// exp(a) / (exp(a) + exp(b)), evaluated as 1 / (1 + exp(b - a)).
inline double pairwise_relevancy(double a, double b) { return 1.0 / (1.0 + std::exp(b - a)); }

/// Max over non-sentinel views of the min over canonical phrases of the
/// pairwise term. Returns 0 when every view is a zero sentinel.
double relevancy(std::span<const Embedding> views, const QuerySpec& q);

class RelevancyMap {
public:
    RelevancyMap() = default;
    RelevancyMap(int width, int height, std::vector<double> scores);

    int width() const { return width_; }
    int height() const { return height_; }
    std::span<const double> scores() const { return scores_; }
    double at(int x, int y) const { return scores_[static_cast<std::size_t>(y) * width_ + x]; }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> scores_;
};

/// Pixels with accumulated alpha below this are treated as empty space.
inline constexpr float kCoverageThreshold = 0.5f;

/// The feature map handed to the snap step: F / alpha where alpha >=
/// kCoverageThreshold, the bank's background vector elsewhere. Dividing out
/// alpha keeps partially covered edge pixels on the segment between the IDs
/// that actually contributed, instead of dragging them toward the origin
/// (and toward whichever unrelated ID lies there).
FeatureMap query_features(const RenderOutput& render);

/// Scores every pixel, evaluating the relevancy once per distinct snapped
/// entry. Background pixels score 0.
RelevancyMap relevancy_map(const SnappedMap& snapped, const MemoryBank& bank, const QuerySpec& q);
RelevancyMap relevancy_map(const FeatureMap& fm, const MemoryBank& bank, const QuerySpec& q,
                           const SnapOptions& options = {});

struct Pixel {
    int x = 0;
    int y = 0;
    bool operator==(const Pixel&) const = default;
};

/// Highest-scoring pixel; the first in row-major order on ties.
Pixel localize(const RelevancyMap& rm);

/// 1 where score > threshold (strict), else 0.
std::vector<std::uint8_t> segment(const RelevancyMap& rm, double threshold);

struct ClassMap {
    int width = 0;
    int height = 0;
    /// 0 for background, otherwise 1 + index of the winning query.
    std::vector<std::uint16_t> classes;
};

/// Per-pixel argmax over queries (smallest index on ties).
ClassMap segment_multiclass(const SnappedMap& snapped, const MemoryBank& bank,
                            std::span<const QuerySpec> queries);
ClassMap segment_multiclass(const FeatureMap& fm, const MemoryBank& bank,
                            std::span<const QuerySpec> queries, const SnapOptions& options = {});

struct RelevancyStats {
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    std::size_t above_threshold = 0;
};

RelevancyStats relevancy_stats(const RelevancyMap& rm, double threshold);

}  // namespace semsplat
