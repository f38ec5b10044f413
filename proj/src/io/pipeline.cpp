#include "semsplat/io/pipeline.hpp"

#include "semsplat/io/bank_file.hpp"

#include <sstream>

namespace semsplat::io {

std::vector<SemanticGaussian> assign_features(std::span<const SemanticGaussian> gaussians,
                                              std::span<const SceneView> views,
                                              std::span<const FeatureMap> label_images) {
    if (views.size() != label_images.size()) throw SceneError("assign_features: need one label image per view");
    std::size_t expected = 0;
    for (std::size_t v = 0; v < views.size(); ++v) {
        const auto& cam = views[v].camera;
        if (label_images[v].width() != cam.width() || label_images[v].height() != cam.height())
            throw SceneError("assign_features: label image " + std::to_string(v) + " does not match its view size");
        expected += static_cast<std::size_t>(cam.width()) * cam.height();
    }
    if (gaussians.size() != expected) {
        std::ostringstream os;
        os << "assign_features: expected " << expected << " pixel-aligned gaussians, got " << gaussians.size();
        throw SceneError(os.str());
    }

    const Vec3f background = MemoryBank::background();
    std::vector<SemanticGaussian> out;
    out.reserve(gaussians.size());
    std::size_t index = 0;
    for (const FeatureMap& image : label_images) {
        for (const Vec3f& value : image.values()) {
            out.push_back(gaussians[index++].with_feature(value == background ? Vec3f::Zero() : value));
        }
    }
    return out;
}

void SceneBundle::validate() const {
    if (!label_maps.empty() && label_maps.size() != scene.views.size())
        throw SceneError("bundle: label map count does not match view count");
    for (std::size_t v = 0; v < label_maps.size(); ++v) {
        const auto& cam = scene.views[v].camera;
        if (label_maps[v].width() != cam.width() || label_maps[v].height() != cam.height())
            throw SceneError("bundle: label map " + std::to_string(v) + " does not match its view size");
        if (!bank) continue;
        for (std::uint16_t label : label_maps[v].labels()) {
            if (label != 0 && bank->index_of(label) == kBackgroundEntry)
                throw SceneError("bundle: label " + std::to_string(label) + " missing from the memory bank");
        }
    }
}

std::filesystem::path label_map_path(const std::filesystem::path& dir, std::size_t view) {
    return dir / ("labels_" + std::to_string(view) + ".png");
}

void write_bundle(const std::filesystem::path& dir, const SceneBundle& bundle) {
    bundle.validate();
    std::filesystem::create_directories(dir);
    write_scene_file(dir / kSceneFileName, bundle.scene);
    if (bundle.bank) write_bank_file(dir / kBankFileName, *bundle.bank);
    for (std::size_t v = 0; v < bundle.label_maps.size(); ++v)
        write_label_map(label_map_path(dir, v), bundle.label_maps[v]);
}

SceneBundle read_bundle(const std::filesystem::path& dir) {
    SceneBundle bundle;
    bundle.scene = read_scene_file(dir / kSceneFileName);
    if (std::filesystem::exists(dir / kBankFileName)) bundle.bank = read_bank_file(dir / kBankFileName);
    for (std::size_t v = 0; v < bundle.scene.views.size(); ++v) {
        const auto path = label_map_path(dir, v);
        if (!std::filesystem::exists(path)) break;
        bundle.label_maps.push_back(read_label_map(path));
    }
    if (!bundle.label_maps.empty() && bundle.label_maps.size() != bundle.scene.views.size())
        throw FormatError(dir.string() + ": label maps present for only some views");
    bundle.validate();
    return bundle;
}

}  // namespace semsplat::io
