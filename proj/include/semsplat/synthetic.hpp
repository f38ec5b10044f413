#pragma once

#include "semsplat/io/pipeline.hpp"
#include "semsplat/mask_association.hpp"
#include "semsplat/rng.hpp"
#include "semsplat/scene_model.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

// Scene generators for tests, benchmarks and demos.
namespace semsplat::synthetic {

struct RandomGaussianOptions {
    /// Means are uniform in [-extent, extent]^3.
    float extent = 1.0f;
    float min_scale = 0.02f;
    float max_scale = 0.25f;
};

std::vector<SemanticGaussian> random_gaussians(std::size_t count, SplitMix64& rng,
                                               const RandomGaussianOptions& options = {});

/// Looks at the origin from a random direction at `distance`, with mild
/// focal-length and principal-point jitter.
PinholeCamera random_camera(int width, int height, SplitMix64& rng, double distance = 3.5);

Embedding random_unit(std::size_t dim, SplitMix64& rng);

/// e_k: mutually orthogonal unit embeddings.
Embedding basis_embedding(std::size_t dim, std::size_t k);

struct Rectangle {
    Vec3d center;
    /// Orthonormal in-plane axes; the normal is u x v.
    Vec3d u;
    Vec3d v;
    double half_u = 0.5;
    double half_v = 0.5;
    Vec3f color = Vec3f::Constant(0.5f);
};

/// Ray parameter of the hit, if the ray crosses the rectangle in front of the origin.
std::optional<double> intersect(const Rectangle& r, const Vec3d& origin, const Vec3d& dir);

struct PlanarSceneOptions {
    int width = 256;
    int height = 192;
    /// In-plane Gaussian sigma in units of the pixel footprint. The default
    /// is the standard deviation of a unit box, 1/sqrt(12).
    double footprint = 0.28867513459481287;
    /// Sub-samples per axis used to set each Gaussian's opacity to the
    /// fraction of its pixel covered by the surface hit at the center. 1
    /// gives every hit full opacity.
    int coverage_samples = 4;
    /// Adds a grey wall behind the objects. It is unlabeled (label 0).
    bool backdrop = false;
};

/// Three tilted rectangles at different depths, seen by two pixel-aligned
/// input views plus a held-out camera. Each input pixel whose ray hits a
/// surface gets a flat Gaussian at the hit point; misses get an invisible
/// (opacity 0) filler so the pixel-aligned count holds.
struct PlanarScene {
    std::vector<Rectangle> objects;
    std::optional<Rectangle> backdrop;
    std::vector<PinholeCamera> input_views;
    PinholeCamera held_out;
    /// Gaussians carry zero features until assigned.
    io::SceneData scene;
    /// Per input view: 1 + object index, 0 where no object is hit.
    std::vector<LabelMap> truth;
    /// Per input view: the RGB image the Gaussians were built from.
    std::vector<FeatureMap> images;
};

PlanarScene make_planar_scene(const PlanarSceneOptions& options = {}, std::uint64_t seed = 7);

/// Object index + 1 of the nearest surface hit through each pixel center, 0
/// for misses and backdrop hits.
LabelMap raycast_labels(const PlanarScene& s, const PinholeCamera& cam);
FeatureMap raycast_colors(const PlanarScene& s, const PinholeCamera& cam);

/// K replicate maps per view in a tracker namespace: truth label l maps to
/// tracker_ids[l - 1]; each pixel is independently replaced by a random
/// label from {0} u tracker_ids with probability `noise`.
ReplicatedSequence noisy_replicates(std::span<const LabelMap> truth, std::span<const std::uint16_t> tracker_ids,
                                    int replicates, double noise, std::uint64_t seed);

struct PlanarPipeline {
    io::SceneBundle bundle;
    /// Query embedding for each object (object i -> queries[i]).
    std::vector<Embedding> queries;
    /// Compacted bank label of each object.
    std::vector<std::uint16_t> object_labels;
};

/// associate -> compact -> bank -> assign on a planar scene, with view
/// embeddings basis_embedding(dim, object index).
PlanarPipeline run_planar_pipeline(const PlanarScene& s, int replicates = kDefaultReplicates,
                                   double noise = 0.1, std::size_t dim = Embedding::kDefaultDim,
                                   std::uint64_t seed = kDefaultSeed);

struct BenchScene {
    io::SceneBundle bundle;
    PinholeCamera camera;
};

/// `count` Gaussians in `objects` clusters in front of a width x height
/// camera, each cluster carrying one bank ID; bank embeddings are random.
BenchScene make_bench_scene(std::size_t count = 100000, std::size_t objects = 256, int width = 576,
                            int height = 416, std::uint64_t seed = 11, std::size_t dim = Embedding::kDefaultDim);

}  // namespace semsplat::synthetic
