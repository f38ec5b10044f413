#pragma once

#include "semsplat/io/png_io.hpp"
#include "semsplat/scene_model.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace semsplat::io {

inline constexpr std::array<char, 4> kSceneMagic = {'S', 'L', 'G', 'S'};
inline constexpr std::uint32_t kSceneFormatVersion = 1;
/// mean 3, scale 3, quaternion 4, opacity 1, rgb 3, feature 3.
inline constexpr std::size_t kGaussianRecordFloats = 17;

struct SceneView {
    PinholeCamera camera;
    /// The view contributes one Gaussian per pixel, view-major then row-major.
    bool pixel_aligned = false;
};

struct SceneData {
    std::string name;
    std::uint64_t seed = 0;
    std::vector<SceneView> views;
    std::vector<SemanticGaussian> gaussians;

    /// Sum of width*height over views, when every view is pixel-aligned.
    std::size_t aligned_pixel_count() const;
    bool pixel_aligned() const;
};

/// Layout, all little-endian:
///   "SLGS" | u32 version | u32 name_len | name | u64 seed | u32 view_count
///   per view: u32 width | u32 height | u8 pixel_aligned | 3 x u8 reserved
///             | f64 fx, fy, cx, cy | f64[16] world_to_camera (row-major)
///   u64 gaussian_count | gaussian_count x 17 x f32 records
std::vector<std::uint8_t> encode_scene(const SceneData& scene);
/// Throws FormatError on bad magic/version, truncation or trailing bytes,
/// and SceneError naming the record on invariant violations.
SceneData decode_scene(std::span<const std::uint8_t> bytes);

void write_scene_file(const std::filesystem::path& path, const SceneData& scene);
SceneData read_scene_file(const std::filesystem::path& path);

}  // namespace semsplat::io
