#pragma once

#include "semsplat/parallel.hpp"
#include "semsplat/scene_model.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace semsplat {

inline constexpr float kAlphaMax = 0.99f;
inline constexpr float kAlphaMin = 1.0f / 255.0f;
/// Added to every projected covariance (pixels^2).
inline constexpr double kCovarianceFloor = 0.3;
inline constexpr float kTransmittanceCutoff = 1e-4f;
inline constexpr double kDefaultNear = 0.01;
inline constexpr int kDefaultTileSize = 16;

/// A splat in screen space. `conic` holds the upper triangle (xx, xy, yy) of
/// the inverse 2D covariance.
struct ProjectedGaussian {
    Vec2f mean2d;
    Eigen::Matrix2d cov2d;
    Eigen::Vector3f conic;
    float depth = 0.0f;
    float opacity = 0.0f;
    /// Mahalanobis^2 beyond which alpha is certainly below kAlphaMin.
    float cutoff = 0.0f;
    /// Half-extents of the cutoff ellipse's bounding box, pixels.
    Vec2f extent;
    Vec3f color;
    Vec3f feature;
    std::uint32_t source = 0;
};

/// Perspective projection with the local affine (EWA) approximation of the
/// covariance. Returns nullopt when the mean is not in front of `near` or the
/// projected covariance is degenerate.
std::optional<ProjectedGaussian> project(const SemanticGaussian& g, const PinholeCamera& cam,
                                         double near = kDefaultNear);

/// Opacity contributed at image point (vx, vy): o * exp(-q/2) clamped to
/// kAlphaMax, or 0 below kAlphaMin. `S` is ProjectedGaussian or any record
/// with the same mean2d / conic / opacity / cutoff members.
template <typename S>
inline float alpha_at(const S& p, float vx, float vy) {
    const float dx = vx - p.mean2d.x();
    const float dy = vy - p.mean2d.y();
    const float q = p.conic[0] * dx * dx + 2.0f * p.conic[1] * dx * dy + p.conic[2] * dy * dy;
    if (!(q <= p.cutoff)) return 0.0f;
    const float a = p.opacity * std::exp(-0.5f * q);
    if (a < kAlphaMin) return 0.0f;
    return std::min(a, kAlphaMax);
}

template <typename S>
inline float alpha_at(const S& p, const Vec2f& v) { return alpha_at(p, v.x(), v.y()); }

/// Stable ascending order of depths.
std::vector<std::uint32_t> sort_by_depth(std::span<const float> depths);
std::vector<std::uint32_t> sort_by_depth(std::span<const ProjectedGaussian> projected);

struct RenderOutput {
    FeatureMap rgb;
    FeatureMap feature;
    std::vector<float> alpha;

    int width() const { return feature.width(); }
    int height() const { return feature.height(); }
};

namespace detail {

/// One front-to-back compositing step. Shared by both renderers so their
/// arithmetic is identical term by term.
struct PixelAccumulator {
    Vec3f color = Vec3f::Zero();
    Vec3f feature = Vec3f::Zero();
    float transmittance = 1.0f;

    template <typename S>
    void add(float alpha, const S& p) {
        const float weight = alpha * transmittance;
        color += weight * p.color;
        feature += weight * p.feature;
        transmittance *= 1.0f - alpha;
    }
};

}  // namespace detail

/// Brute-force renderer: every projected Gaussian, global depth order, no
/// tiling and no early termination.
RenderOutput render_reference(std::span<const SemanticGaussian> gaussians, const PinholeCamera& cam,
                              double near = kDefaultNear);

struct TiledRenderOptions {
    int tile_size = kDefaultTileSize;
    double near = kDefaultNear;
    unsigned threads = default_thread_count();
};

/// Tile-binned renderer with per-pixel early termination once transmittance
/// drops below kTransmittanceCutoff. Output is independent of `threads`.
RenderOutput render_tiled(std::span<const SemanticGaussian> gaussians, const PinholeCamera& cam,
                          const TiledRenderOptions& options = {});

}  // namespace semsplat
