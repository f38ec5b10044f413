// semsplat: command-line front end for the semantic splatting engine.

#include "semsplat/io/bank_file.hpp"
#include "semsplat/io/base64.hpp"
#include "semsplat/io/embedder.hpp"
#include "semsplat/io/pipeline.hpp"
#include "semsplat/io/png_io.hpp"
#include "semsplat/io/scene_file.hpp"
#include "semsplat/io/service.hpp"
#include "semsplat/mask_association.hpp"
#include "semsplat/memory_bank.hpp"
#include "semsplat/query_engine.hpp"
#include "semsplat/rasterizer.hpp"
#include "semsplat/synthetic.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace semsplat;

namespace {

/// Bad invocation that parsing alone cannot catch.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t) { return std::chrono::duration<double, std::milli>(Clock::now() - t).count(); }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text(const fs::path& p, const std::string& text) {
    const auto bytes = std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size());
    io::write_file(p, bytes);
}

std::vector<LabelMap> read_label_dir(const fs::path& dir) {
    std::vector<LabelMap> maps;
    for (std::size_t v = 0; fs::exists(io::label_map_path(dir, v)); ++v) maps.push_back(io::read_label_map(io::label_map_path(dir, v)));
    if (maps.empty()) throw std::runtime_error("no labels_<view>.png files in " + dir.string());
    return maps;
}

/// [f32...] or {"embedding": [f32...]}.
Embedding read_embedding(const fs::path& p) {
    const json j = json::parse(slurp(p));
    const json& values = j.is_object() ? j.at("embedding") : j;
    return Embedding(values.get<std::vector<float>>());
}

std::pair<std::string, int> split_bind(const std::string& bind) {
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos) throw UsageError("--bind expects host:port");
    return {bind.substr(0, colon), std::stoi(bind.substr(colon + 1))};
}

io::Service* g_service = nullptr;

void on_signal(int) {
    if (g_service) g_service->stop();
}

struct Common {
    std::uint64_t seed = kDefaultSeed;
    double threshold = kDefaultThreshold;
    int tile_size = kDefaultTileSize;
    unsigned threads = default_thread_count();
    std::string embedder_url;
    bool mock_embedder = false;
    std::string canon;

    io::EngineOptions engine() const {
        io::EngineOptions e;
        e.render.tile_size = tile_size;
        e.render.threads = threads;
        return e;
    }

    std::shared_ptr<io::Embedder> embedder(std::size_t dim) const {
        if (!embedder_url.empty()) return std::make_shared<io::HttpEmbedder>(embedder_url);
        if (mock_embedder) return std::make_shared<io::MockEmbedder>(dim);
        return nullptr;
    }

    std::vector<Embedding> canonical(std::size_t dim) const {
        std::optional<io::CanonicalSet> file;
        if (!canon.empty()) file = io::read_canonical_file(canon);
        return io::CanonicalProvider(std::move(file), embedder(dim)).get(dim);
    }
};

// -- subcommands ------------------------------------------------------------

struct AssociateArgs {
    std::vector<std::string> inputs;
    int views = 1;
    int replicates = kDefaultReplicates;
    std::string out;
};

int run_associate(const AssociateArgs& a) {
    if (static_cast<int>(a.inputs.size()) != a.views * a.replicates) {
        throw UsageError("expected views*replicates = " + std::to_string(a.views * a.replicates) +
                         " label maps, got " + std::to_string(a.inputs.size()));
    }
    std::vector<LabelMap> maps;
    for (const auto& p : a.inputs) maps.push_back(io::read_label_map(p));
    const ReplicatedSequence seq(a.views, a.replicates, std::move(maps));
    const CompactedLabels compacted = compact_labels(vote(seq));
    fs::create_directories(a.out);
    for (std::size_t v = 0; v < compacted.maps.size(); ++v) io::write_label_map(io::label_map_path(a.out, v), compacted.maps[v]);

    json table = json::object();
    for (const auto& [from, to] : compacted.table) table[std::to_string(from)] = to;
    json report = json::object();
    for (const auto& [label, presence] : consistency_report(compacted.maps)) report[std::to_string(label)] = presence.pixels;
    const json summary = {{"labels", compacted.count}, {"table", table}, {"pixels_per_view", report}};
    write_text(fs::path(a.out) / "association.json", summary.dump(2));
    std::cout << "associated " << a.views << " view(s) x " << a.replicates << " replicate(s): " << compacted.count
              << " object label(s) -> " << a.out << "\n";
    return 0;
}

struct BankArgs {
    std::string labels;
    std::string embeddings;
    std::string out;
    std::size_t dim = 0;
};

int run_bank(const BankArgs& a, const Common& c) {
    const auto maps = read_label_dir(a.labels);
    const ViewEmbeddings embeddings = a.embeddings.empty() ? ViewEmbeddings{} : io::read_view_embeddings(a.embeddings);
    const MemoryBank bank = build_bank(maps, embeddings, c.seed, a.dim);
    io::write_bank_file(a.out, bank);
    std::cout << "bank: " << bank.size() << " entries, lattice m=" << bank.lattice_m() << ", dim " << bank.dim()
              << ", seed " << bank.seed() << " -> " << a.out << "\n";
    return 0;
}

struct AssignArgs {
    std::string scene;
    std::string labels;
    std::string bank;
    std::string out;
};

int run_assign(const AssignArgs& a) {
    io::SceneData scene = io::read_scene_file(a.scene);
    const auto maps = read_label_dir(a.labels);
    const MemoryBank bank = io::read_bank_file(a.bank);
    std::vector<FeatureMap> images;
    for (const auto& m : maps) images.push_back(label_image(m, bank));
    scene.gaussians = io::assign_features(scene.gaussians, scene.views, images);
    const fs::path out(a.out);
    if (fs::is_directory(out) || out.extension().empty()) {
        io::SceneBundle bundle{std::move(scene), maps, bank};
        io::write_bundle(out, bundle);
    } else {
        io::write_scene_file(out, scene);
    }
    std::cout << "assigned features from " << maps.size() << " label map(s) -> " << a.out << "\n";
    return 0;
}

struct ViewArgs {
    std::string scene_dir;
    std::string camera;
    int view = 0;
};

PinholeCamera pick_camera(const ViewArgs& v, const io::SceneBundle& bundle) {
    if (!v.camera.empty()) return io::camera_from_json(slurp(v.camera));
    if (v.view < 0 || v.view >= static_cast<int>(bundle.scene.views.size())) throw UsageError("--view out of range");
    return bundle.scene.views[static_cast<std::size_t>(v.view)].camera;
}

struct RenderArgs {
    ViewArgs view;
    std::string out;
    std::string features;
};

int run_render(const RenderArgs& a, const Common& c) {
    const io::SceneBundle bundle = io::read_bundle(a.view.scene_dir);
    const PinholeCamera cam = pick_camera(a.view, bundle);
    const auto t = Clock::now();
    const RenderOutput out = render_tiled(bundle.scene.gaussians, cam, c.engine().render);
    const double render_ms = ms_since(t);
    io::write_file(a.out, io::encode_png(io::to_rgb8(out.rgb)));
    if (!a.features.empty()) io::write_file(a.features, io::encode_png(io::to_rgb8(out.feature)));
    std::cout << "rendered " << out.width() << "x" << out.height() << " from " << bundle.scene.gaussians.size()
              << " gaussians in " << render_ms << " ms -> " << a.out << "\n";
    return 0;
}

struct QueryArgs {
    ViewArgs view;
    std::vector<std::string> embeddings;
    std::vector<std::string> texts;
    std::string mode = "locate";
    std::string out;
};

int run_query(const QueryArgs& a, const Common& c) {
    if (!a.texts.empty() && c.embedder_url.empty() && !c.mock_embedder) {
        throw UsageError("--text needs an embedder: pass --embedder-url (or --mock-embedder for offline runs), "
                         "or give the query as --embedding FILE");
    }
    if (a.texts.empty() && a.embeddings.empty()) throw UsageError("give --embedding FILE or --text STRING");
    if (a.mode != "multiclass" && a.texts.size() + a.embeddings.size() != 1)
        throw UsageError("mode " + a.mode + " takes exactly one query");

    const io::SceneBundle bundle = io::read_bundle(a.view.scene_dir);
    if (!bundle.bank) throw std::runtime_error("scene has no " + std::string(io::kBankFileName));
    const MemoryBank& bank = *bundle.bank;

    std::vector<Embedding> queries;
    for (const auto& p : a.embeddings) queries.push_back(read_embedding(p));
    if (!a.texts.empty()) {
        auto embedded = c.embedder(bank.dim())->embed(a.texts);
        queries.insert(queries.end(), embedded.begin(), embedded.end());
    }
    const auto canon = c.canonical(bank.dim());
    std::vector<QuerySpec> specs;
    for (const auto& q : queries) specs.emplace_back(q, canon, c.threshold);

    const PinholeCamera cam = pick_camera(a.view, bundle);
    const io::SnappedView view = io::render_and_snap(bundle, cam, c.engine());
    const auto t = Clock::now();
    json result = {{"mode", a.mode}, {"unique_entries", view.snapped.unique.size()}};
    if (a.mode == "multiclass") {
        const ClassMap classes = segment_multiclass(view.snapped, bank, specs);
        std::vector<std::size_t> counts(specs.size() + 1, 0);
        for (auto k : classes.classes) ++counts[k];
        result["class_pixels"] = counts;
        if (!a.out.empty())
            io::write_file(a.out, io::encode_png(io::Image{classes.width, classes.height, io::PixelFormat::Gray16, classes.classes}));
    } else if (a.mode == "locate" || a.mode == "segment") {
        const RelevancyMap rm = relevancy_map(view.snapped, bank, specs.front());
        const RelevancyStats stats = relevancy_stats(rm, c.threshold);
        result["stats"] = {{"min", stats.min}, {"max", stats.max}, {"mean", stats.mean}, {"above_threshold", stats.above_threshold}};
        if (a.mode == "locate") {
            const Pixel p = localize(rm);
            result["point"] = {{"x", p.x}, {"y", p.y}};
            result["score"] = rm.at(p.x, p.y);
        } else {
            const auto mask = segment(rm, c.threshold);
            result["threshold"] = c.threshold;
            result["selected_pixels"] = stats.above_threshold;
            if (!a.out.empty()) io::write_file(a.out, io::encode_png(io::mask_image(rm.width(), rm.height(), mask)));
        }
    } else {
        throw UsageError("--mode must be locate, segment or multiclass");
    }
    const double score_ms = ms_since(t);
    result["timing_ms"] = {{"render", view.render_ms}, {"snap", view.snap_ms}, {"score", score_ms}, {"query", view.snap_ms + score_ms}};
    std::cout << result.dump(2) << "\n";
    return 0;
}

struct ServeArgs {
    std::string scenes_dir;
    std::string bind = "127.0.0.1:8080";
};

int run_serve(const ServeArgs& a, const Common& c) {
    auto registry = std::make_shared<io::SceneRegistry>();
    const auto names = registry->load_directory(a.scenes_dir);
    io::ServiceConfig config;
    config.scenes_dir = a.scenes_dir;
    std::tie(config.host, config.port) = split_bind(a.bind);
    if (!c.embedder_url.empty()) config.embedder_url = c.embedder_url;
    config.mock_embedder = c.mock_embedder;
    if (!c.canon.empty()) config.canonical_file = c.canon;
    config.threshold = c.threshold;
    config.engine = c.engine();

    io::Service service(config, registry);
    const int port = service.bind();
    std::cerr << "serving " << names.size() << " scene(s) from " << a.scenes_dir << " on " << config.host << ":" << port << "\n";
    g_service = &service;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    service.run();
    g_service = nullptr;
    return 0;
}

struct BenchArgs {
    std::string scene_dir;
    std::size_t gaussians = 100000;
    std::size_t objects = 256;
    int width = 576;
    int height = 416;
    int repeats = 10;
};

struct Summary {
    double mean = 0, min = 0, max = 0;
};

Summary summarize(const std::vector<double>& xs) {
    Summary s;
    s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    s.min = *std::min_element(xs.begin(), xs.end());
    s.max = *std::max_element(xs.begin(), xs.end());
    return s;
}

int run_bench(const BenchArgs& a, const Common& c) {
    std::optional<synthetic::BenchScene> scene;
    if (a.scene_dir.empty()) {
        scene.emplace(synthetic::make_bench_scene(a.gaussians, a.objects, a.width, a.height, c.seed));
    } else {
        io::SceneBundle bundle = io::read_bundle(a.scene_dir);
        const PinholeCamera cam = bundle.scene.views.at(0).camera;
        scene.emplace(synthetic::BenchScene{std::move(bundle), cam});
    }
    const MemoryBank& bank = *scene->bundle.bank;
    const auto canon = c.canonical(bank.dim());
    const QuerySpec spec(bank.entry(0).views.front(), canon, c.threshold);

    std::vector<double> render, snap, score, query;
    std::size_t unique = 0;
    for (int i = 0; i < a.repeats; ++i) {
        const io::SnappedView view = io::render_and_snap(scene->bundle, scene->camera, c.engine());
        const auto t = Clock::now();
        const RelevancyMap rm = relevancy_map(view.snapped, bank, spec);
        const auto mask = segment(rm, c.threshold);
        const double s = ms_since(t);
        render.push_back(view.render_ms);
        snap.push_back(view.snap_ms);
        score.push_back(s);
        query.push_back(view.snap_ms + s);
        unique = view.snapped.unique.size();
    }
    std::printf("scene: %zu gaussians, %dx%d, %zu bank entries, %zu unique snapped, %zu canonical, %u thread(s)\n",
                scene->bundle.scene.gaussians.size(), scene->camera.width(), scene->camera.height(), bank.size(), unique,
                canon.size(), c.threads);
    std::printf("%-8s %10s %10s %10s\n", "stage", "mean_ms", "min_ms", "max_ms");
    for (const auto& [name, xs] : {std::pair{"render", &render}, {"snap", &snap}, {"score", &score}, {"query", &query}}) {
        const Summary s = summarize(*xs);
        std::printf("%-8s %10.3f %10.3f %10.3f\n", name, s.mean, s.min, s.max);
    }
    return 0;
}

struct SynthArgs {
    std::string out;
    bool backdrop = false;
    double noise = 0.1;
};

int run_synth(const SynthArgs& a, const Common& c) {
    synthetic::PlanarSceneOptions options;
    options.backdrop = a.backdrop;
    const synthetic::PlanarScene s = synthetic::make_planar_scene(options, c.seed);
    const synthetic::PlanarPipeline p = synthetic::run_planar_pipeline(s, kDefaultReplicates, a.noise, Embedding::kDefaultDim, c.seed);
    const fs::path out(a.out);
    io::write_bundle(out, p.bundle);
    write_text(out / "held_out_camera.json", io::camera_to_json(s.held_out));
    for (std::size_t i = 0; i < p.queries.size(); ++i) {
        const auto v = p.queries[i].values();
        write_text(out / ("query_" + std::to_string(i) + ".json"), json(std::vector<float>(v.begin(), v.end())).dump());
    }
    std::cout << "wrote planar scene (" << s.objects.size() << " objects, " << p.bundle.scene.gaussians.size()
              << " gaussians) -> " << a.out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"semsplat: semantic Gaussian splatting engine"};
    app.require_subcommand(1);
    Common common;
    app.add_option("--seed", common.seed, "Memory-bank / generator seed")->capture_default_str();
    app.add_option("--threshold", common.threshold, "Relevancy threshold in (0,1)")->capture_default_str();
    app.add_option("--tile-size", common.tile_size, "Rasterizer tile size in pixels")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--threads", common.threads, "Worker threads")->capture_default_str();
    app.add_option("--embedder-url", common.embedder_url, "Text embedder base URL (POST /embed)");
    app.add_flag("--mock-embedder", common.mock_embedder, "Use the built-in deterministic embedder for text");
    app.add_option("--canon", common.canon, "Canonical phrase embeddings file")->check(CLI::ExistingFile);

    AssociateArgs associate;
    auto* cmd_associate = app.add_subcommand("associate", "Vote over replicate tracker maps and compact labels");
    cmd_associate->add_option("inputs", associate.inputs, "Replicate label PNGs, view-major")->required()->check(CLI::ExistingFile);
    cmd_associate->add_option("--views", associate.views)->required()->check(CLI::PositiveNumber);
    cmd_associate->add_option("--replicates", associate.replicates)->capture_default_str()->check(CLI::PositiveNumber);
    cmd_associate->add_option("--out", associate.out, "Output directory")->required();

    BankArgs bank;
    auto* cmd_bank = app.add_subcommand("bank", "Build and persist the memory bank");
    cmd_bank->add_option("--labels", bank.labels, "Directory of labels_<view>.png")->required()->check(CLI::ExistingDirectory);
    cmd_bank->add_option("--embeddings", bank.embeddings, "Region embeddings JSON")->check(CLI::ExistingFile);
    cmd_bank->add_option("--dim", bank.dim, "Embedding dimension (0 = infer)");
    cmd_bank->add_option("--out", bank.out, "Bank file")->required();

    AssignArgs assign;
    auto* cmd_assign = app.add_subcommand("assign", "Set per-Gaussian features from label maps");
    cmd_assign->add_option("--scene", assign.scene)->required()->check(CLI::ExistingFile);
    cmd_assign->add_option("--labels", assign.labels)->required()->check(CLI::ExistingDirectory);
    cmd_assign->add_option("--bank", assign.bank)->required()->check(CLI::ExistingFile);
    cmd_assign->add_option("--out", assign.out, "Scene file, or a directory for a full bundle")->required();

    auto add_view = [](CLI::App* cmd, ViewArgs& v) {
        cmd->add_option("--scene-dir", v.scene_dir)->required()->check(CLI::ExistingDirectory);
        auto* cam = cmd->add_option("--camera", v.camera, "Camera JSON file")->check(CLI::ExistingFile);
        cmd->add_option("--view", v.view, "Input view index")->excludes(cam);
    };

    RenderArgs render;
    auto* cmd_render = app.add_subcommand("render", "Render RGB (and optionally features) to PNG");
    add_view(cmd_render, render.view);
    cmd_render->add_option("--out", render.out)->required();
    cmd_render->add_option("--features", render.features, "Also write the feature map as PNG");

    QueryArgs query;
    auto* cmd_query = app.add_subcommand("query", "Locate / segment / multiclass query");
    add_view(cmd_query, query.view);
    cmd_query->add_option("--embedding", query.embeddings, "Query embedding JSON (repeatable)")->check(CLI::ExistingFile);
    cmd_query->add_option("--text", query.texts, "Query text (repeatable; needs an embedder)");
    cmd_query->add_option("--mode", query.mode)->capture_default_str()->check(CLI::IsMember({"locate", "segment", "multiclass"}));
    cmd_query->add_option("--out", query.out, "Mask / class PNG");

    ServeArgs serve;
    auto* cmd_serve = app.add_subcommand("serve", "Run the HTTP service");
    cmd_serve->add_option("--scenes-dir", serve.scenes_dir)->required()->check(CLI::ExistingDirectory);
    cmd_serve->add_option("--bind", serve.bind, "host:port (port 0 picks one)")->capture_default_str();

    BenchArgs bench;
    auto* cmd_bench = app.add_subcommand("bench", "Render and query latency");
    cmd_bench->add_option("--scene-dir", bench.scene_dir, "Benchmark a stored scene instead")->check(CLI::ExistingDirectory);
    cmd_bench->add_option("--gaussians", bench.gaussians)->capture_default_str();
    cmd_bench->add_option("--objects", bench.objects)->capture_default_str();
    cmd_bench->add_option("--width", bench.width)->capture_default_str();
    cmd_bench->add_option("--height", bench.height)->capture_default_str();
    cmd_bench->add_option("--repeats", bench.repeats)->capture_default_str()->check(CLI::PositiveNumber);

    SynthArgs synth;
    auto* cmd_synth = app.add_subcommand("synth", "Write the three-object synthetic scene bundle");
    cmd_synth->add_option("--out", synth.out)->required();
    cmd_synth->add_flag("--backdrop", synth.backdrop);
    cmd_synth->add_option("--noise", synth.noise, "Replicate label noise")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*cmd_associate) return run_associate(associate);
        if (*cmd_bank) return run_bank(bank, common);
        if (*cmd_assign) return run_assign(assign);
        if (*cmd_render) return run_render(render, common);
        if (*cmd_query) return run_query(query, common);
        if (*cmd_serve) return run_serve(serve, common);
        if (*cmd_bench) return run_bench(bench, common);
        if (*cmd_synth) return run_synth(synth, common);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
