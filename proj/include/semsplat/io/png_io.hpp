#pragma once

#include "semsplat/scene_model.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

namespace semsplat::io {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class PixelFormat { Gray8, Gray16, Rgb8 };

struct Image {
    int width = 0;
    int height = 0;
    PixelFormat format = PixelFormat::Rgb8;
    /// Row-major samples; 16-bit samples are stored in native order.
    std::vector<std::uint16_t> samples;
};

std::vector<std::uint8_t> encode_png(const Image& image);
/// Decodes 8/16-bit gray or RGB(A) PNGs without any gamma conversion.
/// Palette and alpha channels are expanded/stripped.
Image decode_png(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Label maps are 16-bit grayscale PNGs; label = pixel value. 8-bit gray
/// files are accepted on read.
void write_label_map(const std::filesystem::path& path, const LabelMap& map);
LabelMap read_label_map(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_label_map(const LabelMap& map);
LabelMap decode_label_map(std::span<const std::uint8_t> bytes);

/// Channels clamped to [0,1] and quantized to 8 bits.
Image to_rgb8(const FeatureMap& map);
Image mask_image(int width, int height, std::span<const std::uint8_t> mask);

}  // namespace semsplat::io
