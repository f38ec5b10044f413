#include "semsplat/io/bank_file.hpp"
#include "semsplat/io/base64.hpp"
#include "semsplat/io/embedder.hpp"
#include "semsplat/io/png_io.hpp"
#include "semsplat/io/scene_file.hpp"
#include "semsplat/io/service.hpp"
#include "semsplat/synthetic.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <cstring>
#include <filesystem>
#include <limits>

using namespace semsplat;
using namespace semsplat::io;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("semsplat_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

SceneData random_scene(std::uint64_t seed, std::size_t count) {
    SplitMix64 rng(seed);
    SceneData s;
    s.name = "random-" + std::to_string(seed);
    s.seed = seed;
    s.views.push_back(SceneView{synthetic::random_camera(40, 30, rng), false});
    s.views.push_back(SceneView{synthetic::random_camera(20, 10, rng), false});
    s.gaussians = synthetic::random_gaussians(count, rng);
    return s;
}

bool same_bits(float a, float b) { return std::memcmp(&a, &b, sizeof a) == 0; }

void expect_bit_equal(const SemanticGaussian& a, const SemanticGaussian& b) {
    const GaussianParams pa = a.params(), pb = b.params();
    for (int k = 0; k < 3; ++k) {
        EXPECT_TRUE(same_bits(pa.mean[k], pb.mean[k]));
        EXPECT_TRUE(same_bits(pa.scale[k], pb.scale[k]));
        EXPECT_TRUE(same_bits(pa.color[k], pb.color[k]));
        EXPECT_TRUE(same_bits(pa.feature[k], pb.feature[k]));
    }
    for (int k = 0; k < 4; ++k) EXPECT_TRUE(same_bits(pa.rotation[k], pb.rotation[k]));
    EXPECT_TRUE(same_bits(pa.opacity, pb.opacity));
}

MemoryBank sample_bank(std::size_t n, std::size_t dim, std::uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<LabelMap> maps{LabelMap(static_cast<int>(n), 1), LabelMap(static_cast<int>(n), 1)};
    ViewEmbeddings e;
    for (std::uint16_t l = 1; l <= n; ++l) {
        maps[0].set(l - 1, 0, l);
        e.emplace(std::pair{0, l}, synthetic::random_unit(dim, rng));
        if (l % 3 != 0) e.emplace(std::pair{1, l}, synthetic::random_unit(dim, rng));
    }
    return build_bank(maps, e, seed, dim);
}

}  // namespace

TEST(Base64, KnownVectorsAndRoundTrip) {
    const std::string text = "any carnal pleas";
    EXPECT_EQ(base64_encode(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size())),
              "YW55IGNhcm5hbCBwbGVhcw==");
    EXPECT_EQ(base64_encode({}), "");
    for (std::size_t n = 0; n < 20; ++n) {
        std::vector<std::uint8_t> bytes(n);
        for (std::size_t i = 0; i < n; ++i) bytes[i] = static_cast<std::uint8_t>(i * 37 + 11);
        EXPECT_EQ(base64_decode(base64_encode(bytes)), bytes);
    }
    EXPECT_THROW(base64_decode("abc"), std::runtime_error);
}

TEST(Base64, FloatsAreLittleEndian) {
    const std::vector<float> v{1.0f, -2.5f, std::numeric_limits<float>::denorm_min()};
    const auto s = encode_f32_base64(v);
    const auto bytes = base64_decode(s);
    ASSERT_EQ(bytes.size(), 12u);
    // 1.0f = 0x3f800000
    EXPECT_EQ(bytes[0], 0x00);
    EXPECT_EQ(bytes[3], 0x3f);
    EXPECT_EQ(bytes[2], 0x80);
    EXPECT_EQ(decode_f32_base64(s), v);
}

TEST(Png, SixteenBitLabelMapRoundTrip) {
    LabelMap m(17, 9);
    for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 17; ++x) m.set(x, y, static_cast<std::uint16_t>((x * 4099 + y * 31) % 65536));
    EXPECT_EQ(decode_label_map(encode_label_map(m)), m);
    const auto dir = temp_dir("png");
    write_label_map(dir / "l.png", m);
    EXPECT_EQ(read_label_map(dir / "l.png"), m);
}

TEST(Png, EightBitGrayAcceptedAsLabels) {
    const Image img{3, 1, PixelFormat::Gray8, {0, 7, 255}};
    const LabelMap m = decode_label_map(encode_png(img));
    EXPECT_EQ(m.labels()[1], 7);
    EXPECT_EQ(m.labels()[2], 255);
}

TEST(Png, RgbRoundTripAndErrors) {
    FeatureMap fm(4, 2);
    fm.at(1, 1) = Vec3f(1.0f, 0.5f, 2.0f);
    const Image decoded = decode_png(encode_png(to_rgb8(fm)));
    EXPECT_EQ(decoded.format, PixelFormat::Rgb8);
    EXPECT_EQ(decoded.samples[(1 * 4 + 1) * 3 + 0], 255);
    EXPECT_EQ(decoded.samples[(1 * 4 + 1) * 3 + 2], 255);
    EXPECT_THROW(decode_label_map(encode_png(decoded)), FormatError);
    const std::vector<std::uint8_t> junk{1, 2, 3, 4, 5, 6, 7, 8, 9};
    EXPECT_THROW(decode_png(junk), FormatError);
}

TEST(SceneFile, RandomSceneRoundTripsBitExactly) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const SceneData s = random_scene(seed, 500);
        const SceneData back = decode_scene(encode_scene(s));
        EXPECT_EQ(back.name, s.name);
        EXPECT_EQ(back.seed, s.seed);
        ASSERT_EQ(back.views.size(), s.views.size());
        for (std::size_t v = 0; v < s.views.size(); ++v) {
            EXPECT_EQ(back.views[v].camera.world_to_camera(), s.views[v].camera.world_to_camera());
            EXPECT_EQ(back.views[v].camera.fx(), s.views[v].camera.fx());
            EXPECT_EQ(back.views[v].camera.cy(), s.views[v].camera.cy());
            EXPECT_EQ(back.views[v].camera.width(), s.views[v].camera.width());
        }
        ASSERT_EQ(back.gaussians.size(), s.gaussians.size());
        for (std::size_t i = 0; i < s.gaussians.size(); ++i) expect_bit_equal(back.gaussians[i], s.gaussians[i]);
        EXPECT_EQ(encode_scene(back), encode_scene(s));
    }
}

TEST(SceneFile, EmptySceneIsValid) {
    SceneData s;
    s.name = "empty";
    const auto dir = temp_dir("scene_empty");
    write_scene_file(dir / "s.slgs", s);
    const SceneData back = read_scene_file(dir / "s.slgs");
    EXPECT_TRUE(back.gaussians.empty());
    EXPECT_TRUE(back.views.empty());
    EXPECT_EQ(back.name, "empty");
}

TEST(SceneFile, CorruptedInputsAreRejected) {
    const auto bytes = encode_scene(random_scene(4, 10));
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    EXPECT_THROW(decode_scene(bad_magic), FormatError);
    auto bad_version = bytes;
    bad_version[4] = 9;
    EXPECT_THROW(decode_scene(bad_version), FormatError);
    EXPECT_THROW(decode_scene(std::span(bytes).first(bytes.size() - 3)), FormatError);
    auto trailing = bytes;
    trailing.push_back(0);
    EXPECT_THROW(decode_scene(trailing), FormatError);
    EXPECT_THROW(decode_scene(std::span(bytes).first(2)), FormatError);
}

TEST(SceneFile, InvariantViolationNamesTheRecord) {
    auto bytes = encode_scene(random_scene(5, 10));
    // Opacity of record 7: it is the 11th float of the 17-float record.
    const std::size_t record_start = bytes.size() - 10 * 17 * 4;
    const float bad = 2.0f;
    std::memcpy(&bytes[record_start + (7 * 17 + 10) * 4], &bad, 4);
    try {
        decode_scene(bytes);
        FAIL() << "accepted opacity 2";
    } catch (const SceneError& e) {
        EXPECT_NE(std::string(e.what()).find("gaussian 7"), std::string::npos) << e.what();
    }
}

TEST(SceneFile, PixelAlignedCountIsChecked) {
    SplitMix64 rng(6);
    SceneData s;
    s.views.push_back(SceneView{synthetic::random_camera(4, 3, rng), true});
    s.gaussians = synthetic::random_gaussians(12, rng);
    EXPECT_EQ(decode_scene(encode_scene(s)).gaussians.size(), 12u);
    s.gaussians.pop_back();
    EXPECT_THROW(decode_scene(encode_scene(s)), FormatError);
}

TEST(BankFile, RoundTripPreservesSnapResults) {
    const MemoryBank bank = sample_bank(30, 24, 77);
    const MemoryBank back = decode_bank(encode_bank(bank));
    EXPECT_EQ(back.seed(), bank.seed());
    EXPECT_EQ(back.lattice_m(), bank.lattice_m());
    ASSERT_EQ(back.size(), bank.size());
    for (std::size_t i = 0; i < bank.size(); ++i) {
        EXPECT_EQ(back.entry(i).id, bank.entry(i).id);
        for (std::size_t v = 0; v < 2; ++v) {
            const auto a = back.entry(i).views[v].values(), b = bank.entry(i).views[v].values();
            EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin(), b.end()));
        }
    }
    SplitMix64 rng(8);
    for (int i = 0; i < 5000; ++i) {
        const Vec3f f = Vec3d(rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2)).cast<float>();
        ASSERT_EQ(back.snap_index(f), bank.snap_index(f));
    }
}

TEST(BankFile, SentinelsAreNull) {
    const auto doc = nlohmann::json::parse(encode_bank(sample_bank(3, 4, 1)));
    EXPECT_EQ(doc.at("format"), "semsplat-bank");
    EXPECT_TRUE(doc.at("entries")[2].at("views")[1].is_null());
    EXPECT_TRUE(doc.at("entries")[0].at("views")[1].is_string());
}

TEST(BankFile, TamperedFilesAreRejected) {
    auto doc = nlohmann::json::parse(encode_bank(sample_bank(5, 4, 1)));
    auto moved = doc;
    moved["entries"][0]["id"] = {0.25, 0.25, 0.25};
    EXPECT_THROW(decode_bank(moved.dump()), FormatError);
    auto version = doc;
    version["version"] = 99;
    EXPECT_THROW(decode_bank(version.dump()), FormatError);
    auto reseeded = doc;
    reseeded["seed"] = 2;
    EXPECT_THROW(decode_bank(reseeded.dump()), FormatError);
    EXPECT_THROW(decode_bank("{not json"), FormatError);
}

TEST(EmbeddingsFile, RoundTrip) {
    ViewEmbeddings e;
    e.emplace(std::pair{0, std::uint16_t{1}}, Embedding(std::vector<float>{0.6f, 0.8f}));
    e.emplace(std::pair{1, std::uint16_t{3}}, Embedding(std::vector<float>{1.0f, 0.0f}));
    const ViewEmbeddings back = decode_view_embeddings(encode_view_embeddings(e));
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back.at({1, 3}).values()[0], 1.0f);
    EXPECT_THROW(decode_view_embeddings(R"({"dim": 3, "records": [{"view": 0, "label": 1, "embedding": [1, 0]}]})"),
                 FormatError);
}

TEST(CanonicalFile, RoundTrip) {
    MockEmbedder mock(16);
    CanonicalSet set{{"object", "things"}, mock.embed(std::vector<std::string>{"object", "things"})};
    const CanonicalSet back = decode_canonical(encode_canonical(set));
    EXPECT_EQ(back.phrases, set.phrases);
    EXPECT_EQ(back.embeddings[1].dim(), 16u);
    EXPECT_THROW(decode_canonical(R"({"phrases": ["a"], "embeddings": []})"), FormatError);
}

TEST(MockEmbedder, DeterministicUnitVectors) {
    MockEmbedder a(64), b(64), other_seed(64, 1);
    const auto x = a.embed_one("red chair");
    EXPECT_NEAR(x.norm(), 1.0, 1e-6);
    const auto y = b.embed_one("red chair");
    EXPECT_TRUE(std::equal(x.values().begin(), x.values().end(), y.values().begin()));
    EXPECT_LT(std::abs(dot(x, a.embed_one("blue chair"))), 0.5);
    EXPECT_FALSE(std::equal(x.values().begin(), x.values().end(), other_seed.embed_one("red chair").values().begin()));
}

TEST(CameraJson, RoundTrip) {
    SplitMix64 rng(9);
    const auto cam = synthetic::random_camera(33, 21, rng);
    const auto back = camera_from_json(camera_to_json(cam));
    EXPECT_EQ(back.world_to_camera(), cam.world_to_camera());
    EXPECT_EQ(back.fx(), cam.fx());
    EXPECT_EQ(back.width(), 33);
    EXPECT_THROW(camera_from_json(R"({"fx": 1})"), SceneError);
    EXPECT_THROW(camera_from_json("nope"), SceneError);
}
