#include "semsplat/io/scene_file.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <sstream>

namespace semsplat::io {
namespace {

class Writer {
public:
    void bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        out_.insert(out_.end(), p, p + n);
    }
    template <typename T>
    void uint(T v) {
        for (std::size_t b = 0; b < sizeof(T); ++b) out_.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
    }
    void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

    std::span<const std::uint8_t> bytes(std::size_t n) {
        if (n > in_.size() - pos_) throw FormatError("scene file: truncated");
        auto s = in_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    template <typename T>
    T uint() {
        const auto s = bytes(sizeof(T));
        T v = 0;
        for (std::size_t b = 0; b < sizeof(T); ++b) v |= static_cast<T>(static_cast<T>(s[b]) << (8 * b));
        return v;
    }
    float f32() { return std::bit_cast<float>(uint<std::uint32_t>()); }
    double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
    std::size_t remaining() const { return in_.size() - pos_; }

private:
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

}  // namespace

std::size_t SceneData::aligned_pixel_count() const {
    std::size_t total = 0;
    for (const auto& v : views) total += static_cast<std::size_t>(v.camera.width()) * v.camera.height();
    return total;
}

bool SceneData::pixel_aligned() const {
    return !views.empty() &&
           std::all_of(views.begin(), views.end(), [](const SceneView& v) { return v.pixel_aligned; });
}

std::vector<std::uint8_t> encode_scene(const SceneData& scene) {
    Writer w;
    w.bytes(kSceneMagic.data(), kSceneMagic.size());
    w.uint<std::uint32_t>(kSceneFormatVersion);
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(scene.name.size()));
    w.bytes(scene.name.data(), scene.name.size());
    w.uint<std::uint64_t>(scene.seed);
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(scene.views.size()));
    for (const SceneView& v : scene.views) {
        const PinholeCamera& c = v.camera;
        w.uint<std::uint32_t>(static_cast<std::uint32_t>(c.width()));
        w.uint<std::uint32_t>(static_cast<std::uint32_t>(c.height()));
        w.uint<std::uint8_t>(v.pixel_aligned ? 1 : 0);
        for (int pad = 0; pad < 3; ++pad) w.uint<std::uint8_t>(0);
        w.f64(c.fx());
        w.f64(c.fy());
        w.f64(c.cx());
        w.f64(c.cy());
        for (int r = 0; r < 4; ++r)
            for (int col = 0; col < 4; ++col) w.f64(c.world_to_camera()(r, col));
    }
    w.uint<std::uint64_t>(scene.gaussians.size());
    for (const SemanticGaussian& g : scene.gaussians) {
        for (int i = 0; i < 3; ++i) w.f32(g.mean()[i]);
        for (int i = 0; i < 3; ++i) w.f32(g.scale()[i]);
        for (int i = 0; i < 4; ++i) w.f32(g.rotation()[i]);
        w.f32(g.opacity());
        for (int i = 0; i < 3; ++i) w.f32(g.color()[i]);
        for (int i = 0; i < 3; ++i) w.f32(g.feature()[i]);
    }
    return w.take();
}

SceneData decode_scene(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    const auto magic = r.bytes(4);
    if (!std::equal(magic.begin(), magic.end(), kSceneMagic.begin())) throw FormatError("scene file: bad magic");
    const auto version = r.uint<std::uint32_t>();
    if (version != kSceneFormatVersion) {
        throw FormatError("scene file: unsupported version " + std::to_string(version));
    }
    SceneData scene;
    const auto name_len = r.uint<std::uint32_t>();
    const auto name = r.bytes(name_len);
    scene.name.assign(name.begin(), name.end());
    scene.seed = r.uint<std::uint64_t>();
    const auto view_count = r.uint<std::uint32_t>();
    for (std::uint32_t v = 0; v < view_count; ++v) {
        const auto width = r.uint<std::uint32_t>();
        const auto height = r.uint<std::uint32_t>();
        const bool aligned = r.uint<std::uint8_t>() != 0;
        r.bytes(3);
        const double fx = r.f64(), fy = r.f64(), cx = r.f64(), cy = r.f64();
        Mat4d pose;
        for (int row = 0; row < 4; ++row)
            for (int col = 0; col < 4; ++col) pose(row, col) = r.f64();
        if (width > 1u << 16 || height > 1u << 16) throw FormatError("scene file: implausible view size");
        scene.views.push_back(SceneView{
            PinholeCamera(fx, fy, cx, cy, static_cast<int>(width), static_cast<int>(height), pose), aligned});
    }
    const auto count = r.uint<std::uint64_t>();
    if (count > r.remaining() / (kGaussianRecordFloats * 4)) throw FormatError("scene file: truncated");
    std::vector<GaussianParams> params(count);
    for (auto& p : params) {
        for (int i = 0; i < 3; ++i) p.mean[i] = r.f32();
        for (int i = 0; i < 3; ++i) p.scale[i] = r.f32();
        for (int i = 0; i < 4; ++i) p.rotation[i] = r.f32();
        p.opacity = r.f32();
        for (int i = 0; i < 3; ++i) p.color[i] = r.f32();
        for (int i = 0; i < 3; ++i) p.feature[i] = r.f32();
    }
    if (r.remaining() != 0) throw FormatError("scene file: trailing bytes after records");
    scene.gaussians = make_scene(params);

    const bool any_aligned =
        std::any_of(scene.views.begin(), scene.views.end(), [](const SceneView& v) { return v.pixel_aligned; });
    if (any_aligned && !scene.pixel_aligned())
        throw FormatError("scene file: views must be either all or none pixel-aligned");
    if (scene.pixel_aligned() && scene.gaussians.size() != scene.aligned_pixel_count()) {
        std::ostringstream os;
        os << "scene file: pixel-aligned views need " << scene.aligned_pixel_count() << " gaussians, found "
           << scene.gaussians.size();
        throw FormatError(os.str());
    }
    return scene;
}

void write_scene_file(const std::filesystem::path& path, const SceneData& scene) {
    write_file(path, encode_scene(scene));
}

SceneData read_scene_file(const std::filesystem::path& path) {
    try {
        return decode_scene(read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace semsplat::io
