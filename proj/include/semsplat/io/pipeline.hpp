#pragma once

#include "semsplat/io/scene_file.hpp"
#include "semsplat/memory_bank.hpp"
#include "semsplat/scene_model.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace semsplat::io {

/// Sets each pixel-aligned Gaussian's feature to the label-image value of its
/// source pixel (view-major, row-major). The reserved background vector of
/// unlabeled pixels becomes the zero feature. Other parameters are untouched.
std::vector<SemanticGaussian> assign_features(std::span<const SemanticGaussian> gaussians,
                                              std::span<const SceneView> views,
                                              std::span<const FeatureMap> label_images);

/// Everything a loaded scene needs for rendering and querying.
struct SceneBundle {
    SceneData scene;
    std::vector<LabelMap> label_maps;
    std::optional<MemoryBank> bank;

    /// Throws SceneError when label maps disagree with views or the bank
    /// misses a label.
    void validate() const;
};

/// Directory layout: scene.slgs, bank.json, labels_<view>.png.
inline constexpr const char* kSceneFileName = "scene.slgs";
inline constexpr const char* kBankFileName = "bank.json";
std::filesystem::path label_map_path(const std::filesystem::path& dir, std::size_t view);

void write_bundle(const std::filesystem::path& dir, const SceneBundle& bundle);
/// bank.json and label maps are optional; the scene file is required.
SceneBundle read_bundle(const std::filesystem::path& dir);

}  // namespace semsplat::io
