#include "semsplat/rasterizer.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace semsplat {
namespace {

// Keeps the bounding box a hair larger than the cutoff ellipse so float
// rounding in alpha_at can never reach a pixel the binning left out.
constexpr double kExtentSlack = 1e-3;

std::vector<ProjectedGaussian> project_all(std::span<const SemanticGaussian> gaussians,
                                           const PinholeCamera& cam, double near,
                                           unsigned threads) {
    constexpr std::size_t kChunk = 4096;
    const std::size_t chunks = (gaussians.size() + kChunk - 1) / kChunk;
    std::vector<std::vector<ProjectedGaussian>> partial(chunks);
    parallel_for(chunks, threads, [&](std::size_t c) {
        const std::size_t begin = c * kChunk;
        const std::size_t end = std::min(gaussians.size(), begin + kChunk);
        auto& out = partial[c];
        out.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i) {
            if (auto p = project(gaussians[i], cam, near)) {
                p->source = static_cast<std::uint32_t>(i);
                out.push_back(*p);
            }
        }
    });
    std::vector<ProjectedGaussian> all;
    for (auto& part : partial) all.insert(all.end(), part.begin(), part.end());
    return all;
}

RenderOutput blank_output(const PinholeCamera& cam) {
    RenderOutput out;
    out.rgb = FeatureMap(cam.width(), cam.height());
    out.feature = FeatureMap(cam.width(), cam.height());
    out.alpha.assign(out.feature.size(), 0.0f);
    return out;
}

void store(RenderOutput& out, std::size_t pixel, const detail::PixelAccumulator& acc) {
    out.rgb[pixel] = acc.color;
    out.feature[pixel] = acc.feature;
    out.alpha[pixel] = 1.0f - acc.transmittance;
}

}  // namespace

std::optional<ProjectedGaussian> project(const SemanticGaussian& g, const PinholeCamera& cam,
                                         double near) {
    const Vec3d t = cam.to_camera(g.mean().cast<double>());
    if (!(t.z() > near)) return std::nullopt;

    const double inv_z = 1.0 / t.z();
    Eigen::Matrix<double, 2, 3> jacobian;
    jacobian << cam.fx() * inv_z, 0.0, -cam.fx() * t.x() * inv_z * inv_z,
                0.0, cam.fy() * inv_z, -cam.fy() * t.y() * inv_z * inv_z;
    const Eigen::Matrix<double, 2, 3> jw = jacobian * cam.rotation();
    Eigen::Matrix2d cov2d = jw * covariance_of(g) * jw.transpose();
    cov2d(0, 1) = cov2d(1, 0) = 0.5 * (cov2d(0, 1) + cov2d(1, 0));
    cov2d += kCovarianceFloor * Eigen::Matrix2d::Identity();

    const double det = cov2d.determinant();
    if (!std::isfinite(det) || det <= 0.0) return std::nullopt;

    ProjectedGaussian p;
    p.mean2d = Vec2f(static_cast<float>(cam.fx() * t.x() * inv_z + cam.cx()),
                     static_cast<float>(cam.fy() * t.y() * inv_z + cam.cy()));
    if (!p.mean2d.allFinite()) return std::nullopt;
    p.cov2d = cov2d;
    p.conic = Eigen::Vector3d(cov2d(1, 1) / det, -cov2d(0, 1) / det, cov2d(0, 0) / det).cast<float>();
    p.depth = static_cast<float>(t.z());
    p.opacity = g.opacity();
    // o * exp(-q/2) >= 1/255  <=>  q <= 2 ln(255 o)
    const double cutoff = g.opacity() > 0.0f ? 2.0 * std::log(255.0 * g.opacity()) : -1.0;
    p.cutoff = static_cast<float>(cutoff > 0.0 ? cutoff * (1.0 + 1e-4) + 1e-4 : cutoff);
    if (p.cutoff >= 0.0f) {
        p.extent = Vec2f(static_cast<float>(std::sqrt(p.cutoff * cov2d(0, 0)) + kExtentSlack),
                         static_cast<float>(std::sqrt(p.cutoff * cov2d(1, 1)) + kExtentSlack));
    } else {
        p.extent = Vec2f::Zero();
    }
    p.color = g.color();
    p.feature = g.feature();
    return p;
}

std::vector<std::uint32_t> sort_by_depth(std::span<const float> depths) {
    std::vector<std::uint32_t> order(depths.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return depths[a] < depths[b]; });
    return order;
}

std::vector<std::uint32_t> sort_by_depth(std::span<const ProjectedGaussian> projected) {
    std::vector<float> depths(projected.size());
    std::transform(projected.begin(), projected.end(), depths.begin(),
                   [](const ProjectedGaussian& p) { return p.depth; });
    return sort_by_depth(depths);
}

RenderOutput render_reference(std::span<const SemanticGaussian> gaussians, const PinholeCamera& cam,
                              double near) {
    RenderOutput out = blank_output(cam);
    const std::vector<ProjectedGaussian> projected = project_all(gaussians, cam, near, 1);
    const std::vector<std::uint32_t> order = sort_by_depth(projected);

    for (int y = 0; y < cam.height(); ++y) {
        for (int x = 0; x < cam.width(); ++x) {
            detail::PixelAccumulator acc;
            for (std::uint32_t idx : order) {
                const float a = alpha_at(projected[idx], static_cast<float>(x), static_cast<float>(y));
                if (a == 0.0f) continue;
                acc.add(a, projected[idx]);
            }
            store(out, static_cast<std::size_t>(y) * cam.width() + x, acc);
        }
    }
    return out;
}

RenderOutput render_tiled(std::span<const SemanticGaussian> gaussians, const PinholeCamera& cam,
                          const TiledRenderOptions& options) {
    if (options.tile_size < 1) throw std::invalid_argument("tile_size must be >= 1");
    RenderOutput out = blank_output(cam);

    const int width = cam.width();
    const int height = cam.height();
    const int tile = options.tile_size;
    const int tiles_x = (width + tile - 1) / tile;
    const int tiles_y = (height + tile - 1) / tile;
    const std::size_t tile_count = static_cast<std::size_t>(tiles_x) * tiles_y;

    std::vector<ProjectedGaussian> projected = project_all(gaussians, cam, options.near, options.threads);

    // Pixel centers covered by the cutoff ellipse's box, clamped to the image.
    struct PixelBox {
        int x0, x1, y0, y1;
    };
    auto pixel_box = [&](const ProjectedGaussian& p) -> std::optional<PixelBox> {
        if (p.cutoff < 0.0f) return std::nullopt;
        const double px0 = std::ceil(static_cast<double>(p.mean2d.x()) - p.extent.x());
        const double px1 = std::floor(static_cast<double>(p.mean2d.x()) + p.extent.x());
        const double py0 = std::ceil(static_cast<double>(p.mean2d.y()) - p.extent.y());
        const double py1 = std::floor(static_cast<double>(p.mean2d.y()) + p.extent.y());
        if (px1 < 0.0 || py1 < 0.0 || px0 > width - 1 || py0 > height - 1) return std::nullopt;
        return PixelBox{static_cast<int>(std::max(px0, 0.0)), static_cast<int>(std::min(px1, width - 1.0)),
                        static_cast<int>(std::max(py0, 0.0)), static_cast<int>(std::min(py1, height - 1.0))};
    };

    // Compact copy of what the inner loop touches.
    struct Splat {
        Vec2f mean2d;
        Eigen::Vector3f conic;
        float opacity;
        float cutoff;
        Vec3f color;
        Vec3f feature;
        PixelBox box;
    };

    const std::vector<std::uint32_t> order = sort_by_depth(projected);

    std::vector<Splat> splats;
    splats.reserve(projected.size());
    std::vector<std::size_t> offsets(tile_count + 1, 0);
    for (std::uint32_t idx : order) {
        const ProjectedGaussian& p = projected[idx];
        const auto box = pixel_box(p);
        if (!box) continue;
        splats.push_back(Splat{p.mean2d, p.conic, p.opacity, p.cutoff, p.color, p.feature, *box});
        for (int ty = box->y0 / tile; ty <= box->y1 / tile; ++ty)
            for (int tx = box->x0 / tile; tx <= box->x1 / tile; ++tx)
                ++offsets[static_cast<std::size_t>(ty) * tiles_x + tx + 1];
    }
    // Counting sort into tiles; splats are already in depth order, so every
    // tile list comes out depth-sorted and stable.
    std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
    std::vector<std::uint32_t> binned(offsets.back());
    {
        std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
        for (std::uint32_t i = 0; i < splats.size(); ++i) {
            const PixelBox& b = splats[i].box;
            for (int ty = b.y0 / tile; ty <= b.y1 / tile; ++ty)
                for (int tx = b.x0 / tile; tx <= b.x1 / tile; ++tx)
                    binned[cursor[static_cast<std::size_t>(ty) * tiles_x + tx]++] = i;
        }
    }

    // Splat-major within a tile: each splat visits only its own pixel box.
    // Every pixel still sees its splats in depth order and stops at the same
    // one as a per-pixel loop would, so results match that loop bit for bit.
    parallel_for(tile_count, options.threads, [&](std::size_t t) {
        const std::span<const std::uint32_t> list(binned.data() + offsets[t], offsets[t + 1] - offsets[t]);
        if (list.empty()) return;
        const int tx0 = static_cast<int>(t % tiles_x) * tile;
        const int ty0 = static_cast<int>(t / tiles_x) * tile;
        const int tw = std::min(width, tx0 + tile) - tx0;
        const int th = std::min(height, ty0 + tile) - ty0;

        std::vector<detail::PixelAccumulator> acc(static_cast<std::size_t>(tw) * th);
        std::vector<std::uint8_t> done(acc.size(), 0);
        std::size_t remaining = acc.size();
        for (std::uint32_t i : list) {
            const Splat& s = splats[i];
            const int x0 = std::max(s.box.x0, tx0) - tx0, x1 = std::min(s.box.x1, tx0 + tw - 1) - tx0;
            const int y0 = std::max(s.box.y0, ty0) - ty0, y1 = std::min(s.box.y1, ty0 + th - 1) - ty0;
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    const std::size_t k = static_cast<std::size_t>(y) * tw + x;
                    if (done[k]) continue;
                    const float a = alpha_at(s, static_cast<float>(tx0 + x), static_cast<float>(ty0 + y));
                    if (a == 0.0f) continue;
                    acc[k].add(a, s);
                    if (acc[k].transmittance < kTransmittanceCutoff) {
                        done[k] = 1;
                        --remaining;
                    }
                }
            }
            if (remaining == 0) break;
        }
        for (int y = 0; y < th; ++y)
            for (int x = 0; x < tw; ++x)
                store(out, static_cast<std::size_t>(ty0 + y) * width + tx0 + x, acc[static_cast<std::size_t>(y) * tw + x]);
    });
    return out;
}

}  // namespace semsplat
