#include "semsplat/synthetic.hpp"

#include "semsplat/memory_bank.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace semsplat::synthetic {
namespace {

Eigen::Vector4f random_quaternion(SplitMix64& rng) {
    // Uniform on SO(3) (Shoemake).
    const double u1 = rng.uniform(), u2 = rng.uniform(), u3 = rng.uniform();
    const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
    const double t2 = 2.0 * std::numbers::pi * u2, t3 = 2.0 * std::numbers::pi * u3;
    const Eigen::Vector4d q(b * std::cos(t3), a * std::sin(t2), a * std::cos(t2), b * std::sin(t3));
    return q.normalized().cast<float>();
}

Vec3f random_unit_color(SplitMix64& rng) {
    return Vec3f(static_cast<float>(rng.uniform()), static_cast<float>(rng.uniform()),
                 static_cast<float>(rng.uniform()));
}

Eigen::Vector4f quaternion_of(const Mat3d& columns) {
    const Eigen::Quaterniond q(columns);
    return Eigen::Vector4d(q.w(), q.x(), q.y(), q.z()).normalized().cast<float>();
}

Rectangle tilted(const Vec3d& center, double yaw_deg, double pitch_deg, double half_u, double half_v,
                 const Vec3f& color) {
    const double yaw = yaw_deg * std::numbers::pi / 180.0;
    const double pitch = pitch_deg * std::numbers::pi / 180.0;
    const Mat3d r = (Eigen::AngleAxisd(yaw, Vec3d::UnitY()) * Eigen::AngleAxisd(pitch, Vec3d::UnitX())).toRotationMatrix();
    return Rectangle{center, r * Vec3d::UnitX(), r * Vec3d::UnitY(), half_u, half_v, color};
}

struct Hit {
    /// Index into objects, or objects.size() for the backdrop.
    std::size_t surface;
    double t;
};

std::optional<Hit> trace(const PlanarScene& s, const Vec3d& origin, const Vec3d& dir) {
    std::optional<Hit> best;
    auto consider = [&](const Rectangle& r, std::size_t index) {
        if (auto t = intersect(r, origin, dir); t && (!best || *t < best->t)) best = Hit{index, *t};
    };
    for (std::size_t i = 0; i < s.objects.size(); ++i) consider(s.objects[i], i);
    if (s.backdrop) consider(*s.backdrop, s.objects.size());
    return best;
}

const Rectangle& surface(const PlanarScene& s, std::size_t index) {
    return index < s.objects.size() ? s.objects[index] : *s.backdrop;
}

}  // namespace

std::vector<SemanticGaussian> random_gaussians(std::size_t count, SplitMix64& rng,
                                               const RandomGaussianOptions& options) {
    std::vector<SemanticGaussian> out;
    out.reserve(count);
    const double e = options.extent;
    for (std::size_t i = 0; i < count; ++i) {
        GaussianParams p;
        p.mean = Vec3d(rng.uniform(-e, e), rng.uniform(-e, e), rng.uniform(-e, e)).cast<float>();
        for (int k = 0; k < 3; ++k) p.scale[k] = static_cast<float>(rng.uniform(options.min_scale, options.max_scale));
        p.rotation = random_quaternion(rng);
        // Mix of faint, medium and near-opaque splats so the alpha clamp and
        // the early-termination path both get exercised.
        const double pick = rng.uniform();
        p.opacity = static_cast<float>(pick < 0.2 ? rng.uniform(0.0, 0.05) : pick < 0.7 ? rng.uniform(0.05, 0.9)
                                                                                       : rng.uniform(0.9, 1.0));
        p.color = random_unit_color(rng);
        p.feature = random_unit_color(rng);
        out.emplace_back(p);
    }
    return out;
}

PinholeCamera random_camera(int width, int height, SplitMix64& rng, double distance) {
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double z = rng.uniform(-0.8, 0.8);
    const double r = std::sqrt(1.0 - z * z);
    const Vec3d eye = distance * Vec3d(r * std::cos(theta), r * std::sin(theta), z);
    // Keep `up` away from the view direction.
    const Vec3d up = std::abs(z) < 0.7 ? Vec3d(0, 0, 1) : Vec3d(1, 0, 0);
    const double f = rng.uniform(0.8, 1.3) * width;
    const double cx = width / 2.0 + rng.uniform(-2.0, 2.0);
    const double cy = height / 2.0 + rng.uniform(-2.0, 2.0);
    const Vec3d target(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2));
    return PinholeCamera::look_at(eye, target, up, f, f * rng.uniform(0.95, 1.05), cx, cy, width, height);
}

Embedding random_unit(std::size_t dim, SplitMix64& rng) {
    std::vector<float> v(dim);
    for (float& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
    return Embedding(std::move(v)).normalized();
}

Embedding basis_embedding(std::size_t dim, std::size_t k) {
    if (k >= dim) throw std::invalid_argument("basis index exceeds the embedding dimension");
    std::vector<float> v(dim, 0.0f);
    v[k] = 1.0f;
    return Embedding(std::move(v));
}

std::optional<double> intersect(const Rectangle& r, const Vec3d& origin, const Vec3d& dir) {
    const Vec3d n = r.u.cross(r.v);
    const double denom = dir.dot(n);
    if (std::abs(denom) < 1e-12) return std::nullopt;
    const double t = (r.center - origin).dot(n) / denom;
    if (!(t > 0.0)) return std::nullopt;
    const Vec3d local = origin + t * dir - r.center;
    if (std::abs(local.dot(r.u)) > r.half_u || std::abs(local.dot(r.v)) > r.half_v) return std::nullopt;
    return t;
}

namespace {

/// Fraction of pixel (x, y) whose sub-sample rays hit `surface` first.
double coverage(const PlanarScene& s, const PinholeCamera& cam, int x, int y, std::size_t surface, int n) {
    if (n <= 1) return 1.0;
    int inside = 0;
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const double u = x - 0.5 + (i + 0.5) / n;
            const double v = y - 0.5 + (j + 0.5) / n;
            const auto hit = trace(s, cam.center(), cam.ray_direction(u, v));
            inside += hit && hit->surface == surface;
        }
    }
    return static_cast<double>(inside) / (n * n);
}

}  // namespace

PlanarScene make_planar_scene(const PlanarSceneOptions& options, std::uint64_t seed) {
    const int w = options.width;
    const int h = options.height;
    const double f = w;
    const Vec3d up(0, -1, 0);
    auto camera = [&](const Vec3d& eye, const Vec3d& target) {
        return PinholeCamera::look_at(eye, target, up, f, f, w / 2.0, h / 2.0, w, h);
    };

    PlanarScene s{
        .objects = {tilted({-1.25, -0.15, -0.3}, -15, 5, 0.5, 0.45, {0.85f, 0.25f, 0.2f}),
                    tilted({0.0, 0.2, 0.0}, 10, -8, 0.5, 0.5, {0.2f, 0.75f, 0.3f}),
                    tilted({1.3, -0.1, 0.4}, 20, 6, 0.5, 0.42, {0.25f, 0.35f, 0.9f})},
        .backdrop = std::nullopt,
        .input_views = {camera({-0.6, -0.2, -4.0}, {0, 0, 0}), camera({0.6, 0.15, -4.0}, {0, 0, 0})},
        .held_out = camera({0.2, -0.35, -3.8}, {0.05, 0.0, 0.0}),
        .scene = {},
        .truth = {},
        .images = {},
    };
    if (options.backdrop) s.backdrop = tilted({0.0, 0.0, 1.5}, 0, 0, 6.0, 5.0, {0.5f, 0.5f, 0.5f});

    s.scene.name = "planar";
    s.scene.seed = seed;
    for (const auto& cam : s.input_views) {
        s.scene.views.push_back(io::SceneView{cam, true});
        LabelMap truth(w, h);
        FeatureMap image(w, h);
        const Vec3d eye = cam.center();
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const Vec3d dir = cam.ray_direction(x, y);
                GaussianParams p;
                p.rotation = Eigen::Vector4f(1, 0, 0, 0);
                p.feature = Vec3f::Zero();
                if (const auto hit = trace(s, eye, dir)) {
                    const Rectangle& r = surface(s, hit->surface);
                    const Vec3d point = eye + hit->t * dir;
                    const double sigma = options.footprint * cam.to_camera(point).z() / f;
                    Mat3d axes;
                    axes << r.u, r.v, r.u.cross(r.v);
                    p.mean = point.cast<float>();
                    p.scale = Vec3d(sigma, sigma, 0.1 * sigma).cast<float>();
                    p.rotation = quaternion_of(axes);
                    p.opacity = static_cast<float>(coverage(s, cam, x, y, hit->surface, options.coverage_samples));
                    p.color = r.color;
                    image.at(x, y) = r.color;
                    if (hit->surface < s.objects.size()) truth.set(x, y, static_cast<std::uint16_t>(hit->surface + 1));
                } else {
                    p.mean = (eye + 10.0 * dir).cast<float>();
                    p.scale = Vec3f::Constant(0.01f);
                    p.opacity = 0.0f;
                    p.color = Vec3f::Zero();
                }
                s.scene.gaussians.emplace_back(p);
            }
        }
        s.truth.push_back(std::move(truth));
        s.images.push_back(std::move(image));
    }
    return s;
}

LabelMap raycast_labels(const PlanarScene& s, const PinholeCamera& cam) {
    LabelMap out(cam.width(), cam.height());
    for (int y = 0; y < cam.height(); ++y) {
        for (int x = 0; x < cam.width(); ++x) {
            const auto hit = trace(s, cam.center(), cam.ray_direction(x, y));
            if (hit && hit->surface < s.objects.size()) out.set(x, y, static_cast<std::uint16_t>(hit->surface + 1));
        }
    }
    return out;
}

FeatureMap raycast_colors(const PlanarScene& s, const PinholeCamera& cam) {
    FeatureMap out(cam.width(), cam.height());
    for (int y = 0; y < cam.height(); ++y) {
        for (int x = 0; x < cam.width(); ++x) {
            if (const auto hit = trace(s, cam.center(), cam.ray_direction(x, y)))
                out.at(x, y) = surface(s, hit->surface).color;
        }
    }
    return out;
}

ReplicatedSequence noisy_replicates(std::span<const LabelMap> truth, std::span<const std::uint16_t> tracker_ids,
                                    int replicates, double noise, std::uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<LabelMap> maps;
    for (const LabelMap& t : truth) {
        for (int k = 0; k < replicates; ++k) {
            LabelMap m(t.width(), t.height());
            for (int y = 0; y < t.height(); ++y) {
                for (int x = 0; x < t.width(); ++x) {
                    std::uint16_t label = t.at(x, y) == 0 ? 0 : tracker_ids[t.at(x, y) - 1];
                    if (rng.uniform() < noise) {
                        const auto pick = rng.below(tracker_ids.size() + 1);
                        label = pick == 0 ? 0 : tracker_ids[pick - 1];
                    }
                    m.set(x, y, label);
                }
            }
            maps.push_back(std::move(m));
        }
    }
    return ReplicatedSequence(static_cast<int>(truth.size()), replicates, std::move(maps));
}

PlanarPipeline run_planar_pipeline(const PlanarScene& s, int replicates, double noise, std::size_t dim,
                                   std::uint64_t seed) {
    // Tracker IDs deliberately sparse and out of order.
    std::vector<std::uint16_t> tracker_ids;
    for (std::size_t i = 0; i < s.objects.size(); ++i) tracker_ids.push_back(static_cast<std::uint16_t>(900 - 97 * i));

    const ReplicatedSequence seq = noisy_replicates(s.truth, tracker_ids, replicates, noise, seed ^ 0xabcdULL);
    const std::vector<LabelMap> voted = vote(seq);
    CompactedLabels compacted = compact_labels(voted);

    PlanarPipeline out;
    for (std::uint16_t t : tracker_ids) {
        const auto it = compacted.table.find(t);
        if (it == compacted.table.end()) throw std::runtime_error("an object vanished during association");
        out.object_labels.push_back(it->second);
    }

    ViewEmbeddings embeddings;
    const auto presence = consistency_report(compacted.maps);
    for (std::size_t i = 0; i < out.object_labels.size(); ++i) {
        const std::uint16_t label = out.object_labels[i];
        for (std::size_t v = 0; v < compacted.maps.size(); ++v) {
            if (presence.at(label).present_in(v)) embeddings.emplace(std::pair{static_cast<int>(v), label}, basis_embedding(dim, i));
        }
        out.queries.push_back(basis_embedding(dim, i));
    }
    MemoryBank bank = build_bank(compacted.maps, embeddings, seed, dim);

    std::vector<FeatureMap> label_images;
    for (const LabelMap& m : compacted.maps) label_images.push_back(label_image(m, bank));
    io::SceneData scene = s.scene;
    scene.gaussians = io::assign_features(s.scene.gaussians, s.scene.views, label_images);

    out.bundle = io::SceneBundle{std::move(scene), std::move(compacted.maps), std::move(bank)};
    out.bundle.validate();
    return out;
}

BenchScene make_bench_scene(std::size_t count, std::size_t objects, int width, int height, std::uint64_t seed,
                            std::size_t dim) {
    if (objects == 0 || objects > count) throw std::invalid_argument("bench scene needs 1..count objects");
    SplitMix64 rng(seed);
    const double f = 0.9 * width;
    const PinholeCamera cam =
        PinholeCamera::look_at({0, 0, -6}, {0, 0, 0}, {0, -1, 0}, f, f, width / 2.0, height / 2.0, width, height);

    const std::vector<Vec3f> ids = generate_ids(objects, seed);
    std::vector<BankEntry> entries;
    std::vector<Vec3d> centers;
    std::vector<Vec3f> colors;
    for (std::size_t k = 0; k < objects; ++k) {
        entries.push_back(BankEntry{static_cast<std::uint16_t>(k + 1), ids[k], {random_unit(dim, rng), random_unit(dim, rng)}});
        // Spread cluster centers over the frustum between depths 3 and 9.
        const double depth = rng.uniform(3.0, 9.0);
        const Vec3d along = cam.ray_direction(width * rng.uniform(0.05, 0.95), height * rng.uniform(0.05, 0.95));
        centers.push_back(cam.center() + depth / along.z() * along);
        colors.push_back(random_unit_color(rng));
    }

    io::SceneData scene;
    scene.name = "bench";
    scene.seed = seed;
    scene.views.push_back(io::SceneView{cam, false});
    scene.gaussians.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t k = i % objects;
        GaussianParams p;
        const Vec3d offset(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        p.mean = (centers[k] + 0.35 * offset).cast<float>();
        for (int a = 0; a < 3; ++a) p.scale[a] = static_cast<float>(rng.uniform(0.005, 0.03));
        p.rotation = random_quaternion(rng);
        p.opacity = static_cast<float>(rng.uniform(0.3, 1.0));
        p.color = colors[k];
        p.feature = ids[k];
        scene.gaussians.emplace_back(p);
    }

    BenchScene out{io::SceneBundle{std::move(scene), {}, MemoryBank(dim, 2, seed, std::move(entries))}, cam};
    out.bundle.validate();
    return out;
}

}  // namespace semsplat::synthetic
