#pragma once

#include "semsplat/io/bank_file.hpp"
#include "semsplat/io/embedder.hpp"
#include "semsplat/io/pipeline.hpp"
#include "semsplat/query_engine.hpp"
#include "semsplat/rasterizer.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace semsplat::io {

struct EngineOptions {
    TiledRenderOptions render;
    SnapOptions snap;
};

/// A rendered view snapped onto the memory bank, with stage timings.
struct SnappedView {
    RenderOutput render;
    SnappedMap snapped;
    double render_ms = 0.0;
    double snap_ms = 0.0;
};

SnappedView render_and_snap(const SceneBundle& bundle, const PinholeCamera& camera, const EngineOptions& options);

/// Camera JSON: {"fx", "fy", "cx", "cy", "width", "height",
/// "world_to_camera": [16 numbers, row-major]}.
PinholeCamera camera_from_json(const std::string& text);
std::string camera_to_json(const PinholeCamera& camera);

/// Loaded scenes by name. Reads may run concurrently; load/unload are exclusive.
class SceneRegistry {
public:
    /// Loads every subdirectory holding a scene file; returns the names loaded.
    std::vector<std::string> load_directory(const std::filesystem::path& dir);
    void add(const std::string& name, SceneBundle bundle);
    bool remove(const std::string& name);
    std::shared_ptr<const SceneBundle> find(const std::string& name) const;
    std::vector<std::string> names() const;

private:
    mutable std::shared_mutex mutex_;
    std::map<std::string, std::shared_ptr<const SceneBundle>> scenes_;
};

/// Resolves the canonical-phrase embeddings: an explicit file wins, then the
/// configured embedder, then the mock embedder. Results are cached per dim.
class CanonicalProvider {
public:
    CanonicalProvider(std::optional<CanonicalSet> file, std::shared_ptr<Embedder> embedder);
    std::vector<Embedding> get(std::size_t dim);

private:
    std::optional<CanonicalSet> file_;
    std::shared_ptr<Embedder> embedder_;
    std::mutex mutex_;
    std::map<std::size_t, std::vector<Embedding>> cache_;
};

struct ServiceConfig {
    std::filesystem::path scenes_dir;
    std::string host = "127.0.0.1";
    /// 0 picks a free port.
    int port = 8080;
    std::optional<std::string> embedder_url;
    /// Use the built-in mock embedder for `text` queries.
    bool mock_embedder = false;
    std::optional<std::filesystem::path> canonical_file;
    double threshold = kDefaultThreshold;
    EngineOptions engine;
};

/// HTTP front end:
///   GET  /healthz
///   GET  /scenes
///   POST /scenes/{name}/render
///   POST /scenes/{name}/query
class Service {
public:
    Service(ServiceConfig config, std::shared_ptr<SceneRegistry> registry);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds the listening socket and returns the bound port.
    int bind();
    /// Serves until stop(); call bind() first.
    void run();
    void stop();
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace semsplat::io
