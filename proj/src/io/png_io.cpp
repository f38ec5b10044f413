#include "semsplat/io/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <string>

namespace semsplat::io {
namespace {

void on_png_error(png_structp png, png_const_charp message) {
    auto* text = static_cast<std::string*>(png_get_error_ptr(png));
    if (text) *text = message;
    png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

struct ReadCursor {
    std::span<const std::uint8_t> bytes;
    std::size_t offset = 0;
};

void read_from_memory(png_structp png, png_bytep out, png_size_t length) {
    auto* cursor = static_cast<ReadCursor*>(png_get_io_ptr(png));
    if (cursor->offset + length > cursor->bytes.size()) png_error(png, "truncated PNG data");
    std::memcpy(out, cursor->bytes.data() + cursor->offset, length);
    cursor->offset += length;
}

void write_to_memory(png_structp png, png_bytep data, png_size_t length) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + length);
}

void flush_noop(png_structp) {}

int channels_of(PixelFormat f) { return f == PixelFormat::Rgb8 ? 3 : 1; }
int depth_of(PixelFormat f) { return f == PixelFormat::Gray16 ? 16 : 8; }

}  // namespace

std::vector<std::uint8_t> encode_png(const Image& image) {
    const int channels = channels_of(image.format);
    const int depth = depth_of(image.format);
    if (image.width < 1 || image.height < 1 ||
        image.samples.size() != static_cast<std::size_t>(image.width) * image.height * channels)
        throw FormatError("png: sample count does not match dimensions");

    // Big-endian rows, built before setjmp so no C++ objects are skipped by longjmp.
    const std::size_t row_bytes = static_cast<std::size_t>(image.width) * channels * (depth / 8);
    std::vector<std::uint8_t> raw(row_bytes * image.height);
    for (std::size_t i = 0; i < image.samples.size(); ++i) {
        if (depth == 16) {
            raw[2 * i] = static_cast<std::uint8_t>(image.samples[i] >> 8);
            raw[2 * i + 1] = static_cast<std::uint8_t>(image.samples[i] & 0xff);
        } else {
            raw[i] = static_cast<std::uint8_t>(std::min<std::uint16_t>(image.samples[i], 255));
        }
    }
    std::vector<png_bytep> rows(image.height);
    for (int y = 0; y < image.height; ++y) rows[y] = raw.data() + row_bytes * y;

    std::vector<std::uint8_t> out;
    std::string error;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, on_png_error, on_png_warning);
    if (!png) throw FormatError("png: cannot create writer");
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw FormatError("png: encode failed: " + error);
    }
    png_set_write_fn(png, &out, write_to_memory, flush_noop);
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height),
                 depth, channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 1);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw FormatError("png: bad signature");

    ReadCursor cursor{bytes, 0};
    std::string error;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, on_png_error, on_png_warning);
    if (!png) throw FormatError("png: cannot create reader");
    png_infop info = png_create_info_struct(png);
    // Everything touched after setjmp lives in plain storage declared here.
    png_uint_32 width = 0, height = 0;
    int depth = 0, color = 0, channels = 0;
    std::vector<std::uint8_t> raw;
    std::vector<png_bytep> rows;
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("png: decode failed: " + error);
    }
    png_set_read_fn(png, &cursor, read_from_memory);
    png_read_info(png, info);
    png_get_IHDR(png, info, &width, &height, &depth, &color, nullptr, nullptr, nullptr);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    depth = png_get_bit_depth(png, info);
    channels = png_get_channels(png, info);
    const std::size_t row_bytes = png_get_rowbytes(png, info);
    raw.resize(row_bytes * height);
    rows.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = raw.data() + row_bytes * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Image image;
    image.width = static_cast<int>(width);
    image.height = static_cast<int>(height);
    if (channels == 1) {
        image.format = depth == 16 ? PixelFormat::Gray16 : PixelFormat::Gray8;
    } else if (channels == 3 && depth == 8) {
        image.format = PixelFormat::Rgb8;
    } else {
        throw FormatError("png: unsupported channel layout");
    }
    const std::size_t count = static_cast<std::size_t>(width) * height * channels;
    image.samples.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        image.samples[i] = depth == 16 ? static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]) : raw[i];
    }
    return image;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("short write to " + path.string());
}

std::vector<std::uint8_t> encode_label_map(const LabelMap& map) {
    Image image{map.width(), map.height(), PixelFormat::Gray16, {}};
    image.samples.assign(map.labels().begin(), map.labels().end());
    return encode_png(image);
}

LabelMap decode_label_map(std::span<const std::uint8_t> bytes) {
    Image image = decode_png(bytes);
    if (image.format == PixelFormat::Rgb8) throw FormatError("label map must be a grayscale PNG");
    return LabelMap(image.width, image.height, std::move(image.samples));
}

void write_label_map(const std::filesystem::path& path, const LabelMap& map) {
    write_file(path, encode_label_map(map));
}

LabelMap read_label_map(const std::filesystem::path& path) {
    try {
        return decode_label_map(read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

Image to_rgb8(const FeatureMap& map) {
    Image image{map.width(), map.height(), PixelFormat::Rgb8, {}};
    image.samples.resize(map.size() * 3);
    for (std::size_t i = 0; i < map.size(); ++i) {
        for (int c = 0; c < 3; ++c) {
            const float v = std::clamp(map[i][c], 0.0f, 1.0f);
            image.samples[3 * i + c] = static_cast<std::uint16_t>(std::lround(v * 255.0f));
        }
    }
    return image;
}

Image mask_image(int width, int height, std::span<const std::uint8_t> mask) {
    Image image{width, height, PixelFormat::Gray8, {}};
    image.samples.resize(mask.size());
    std::transform(mask.begin(), mask.end(), image.samples.begin(),
                   [](std::uint8_t m) { return static_cast<std::uint16_t>(m ? 255 : 0); });
    return image;
}

}  // namespace semsplat::io
