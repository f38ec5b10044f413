#include "semsplat/io/service.hpp"

#include "semsplat/io/base64.hpp"
#include "semsplat/io/png_io.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <iostream>

namespace semsplat::io {
namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
    return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

struct HttpError {
    int status;
    std::string message;
};

PinholeCamera camera_from(const json& j) {
    try {
        const auto pose = j.at("world_to_camera").get<std::vector<double>>();
        if (pose.size() != 16) throw HttpError{400, "world_to_camera must have 16 entries"};
        Mat4d m;
        for (int i = 0; i < 16; ++i) m(i / 4, i % 4) = pose[static_cast<std::size_t>(i)];
        return PinholeCamera(j.at("fx").get<double>(), j.at("fy").get<double>(), j.at("cx").get<double>(),
                             j.at("cy").get<double>(), j.at("width").get<int>(), j.at("height").get<int>(), m);
    } catch (const json::exception& e) {
        throw HttpError{400, std::string("malformed camera: ") + e.what()};
    } catch (const SceneError& e) {
        throw HttpError{400, std::string("invalid camera: ") + e.what()};
    }
}

json camera_json(const PinholeCamera& c) {
    std::vector<double> pose(16);
    for (int i = 0; i < 16; ++i) pose[static_cast<std::size_t>(i)] = c.world_to_camera()(i / 4, i % 4);
    return {{"fx", c.fx()}, {"fy", c.fy()}, {"cx", c.cx()}, {"cy", c.cy()},
            {"width", c.width()}, {"height", c.height()}, {"world_to_camera", pose}};
}

/// {"camera": {...}} or {"view": i} selecting a stored input camera.
PinholeCamera request_camera(const json& body, const SceneBundle& bundle) {
    if (body.contains("camera")) return camera_from(body.at("camera"));
    if (body.contains("view")) {
        if (!body.at("view").is_number_integer()) throw HttpError{400, "view must be an integer"};
        const auto view = body.at("view").get<long long>();
        if (view < 0 || view >= static_cast<long long>(bundle.scene.views.size()))
            throw HttpError{400, "view index out of range"};
        return bundle.scene.views[static_cast<std::size_t>(view)].camera;
    }
    throw HttpError{400, "request needs a camera or a view index"};
}

Embedding embedding_from(const json& j, std::size_t dim) {
    std::vector<float> values;
    try {
        values = j.get<std::vector<float>>();
    } catch (const json::exception&) {
        throw HttpError{400, "embedding must be an array of numbers"};
    }
    if (values.size() != dim) {
        throw HttpError{400, "embedding has dimension " + std::to_string(values.size()) + ", scene bank uses " +
                                 std::to_string(dim)};
    }
    try {
        Embedding e(std::move(values));
        if (e.is_zero()) throw HttpError{400, "embedding must be non-zero"};
        return e;
    } catch (const SceneError& e) {
        throw HttpError{400, e.what()};
    }
}

std::string to_string(std::span<const std::uint8_t> bytes) { return {bytes.begin(), bytes.end()}; }

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

}  // namespace

// -- shared engine helpers -----------------------------------------------------

SnappedView render_and_snap(const SceneBundle& bundle, const PinholeCamera& camera, const EngineOptions& options) {
    if (!bundle.bank) throw SceneError("scene has no memory bank");
    SnappedView view;
    auto start = Clock::now();
    view.render = render_tiled(bundle.scene.gaussians, camera, options.render);
    view.render_ms = elapsed_ms(start);
    start = Clock::now();
    view.snapped = snap_map(query_features(view.render), *bundle.bank, options.snap, options.render.threads);
    view.snap_ms = elapsed_ms(start);
    return view;
}

PinholeCamera camera_from_json(const std::string& text) {
    try {
        return camera_from(json::parse(text));
    } catch (const HttpError& e) {
        throw SceneError(e.message);
    } catch (const json::exception& e) {
        throw SceneError(std::string("malformed camera JSON: ") + e.what());
    }
}

std::string camera_to_json(const PinholeCamera& camera) { return camera_json(camera).dump(); }

// -- SceneRegistry ---------------------------------------------------------------

std::vector<std::string> SceneRegistry::load_directory(const std::filesystem::path& dir) {
    std::vector<std::pair<std::string, SceneBundle>> loaded;
    for (const auto& item : std::filesystem::directory_iterator(dir)) {
        if (!item.is_directory() || !std::filesystem::exists(item.path() / kSceneFileName)) continue;
        loaded.emplace_back(item.path().filename().string(), read_bundle(item.path()));
    }
    std::vector<std::string> names;
    std::unique_lock lock(mutex_);
    for (auto& [name, bundle] : loaded) {
        scenes_[name] = std::make_shared<const SceneBundle>(std::move(bundle));
        names.push_back(name);
    }
    return names;
}

void SceneRegistry::add(const std::string& name, SceneBundle bundle) {
    bundle.validate();
    auto shared = std::make_shared<const SceneBundle>(std::move(bundle));
    std::unique_lock lock(mutex_);
    scenes_[name] = std::move(shared);
}

bool SceneRegistry::remove(const std::string& name) {
    std::unique_lock lock(mutex_);
    return scenes_.erase(name) > 0;
}

std::shared_ptr<const SceneBundle> SceneRegistry::find(const std::string& name) const {
    std::shared_lock lock(mutex_);
    const auto it = scenes_.find(name);
    return it == scenes_.end() ? nullptr : it->second;
}

std::vector<std::string> SceneRegistry::names() const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [name, _] : scenes_) out.push_back(name);
    return out;
}

// -- CanonicalProvider -----------------------------------------------------------

CanonicalProvider::CanonicalProvider(std::optional<CanonicalSet> file, std::shared_ptr<Embedder> embedder)
    : file_(std::move(file)), embedder_(std::move(embedder)) {}

std::vector<Embedding> CanonicalProvider::get(std::size_t dim) {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(dim); it != cache_.end()) return it->second;
    const std::vector<std::string> phrases(kCanonicalPhrases.begin(), kCanonicalPhrases.end());
    std::vector<Embedding> result;
    if (file_) {
        result = file_->embeddings;
    } else if (embedder_) {
        result = embedder_->embed(phrases);
    } else {
        result = MockEmbedder(dim).embed(phrases);
    }
    for (const auto& e : result) {
        if (e.dim() != dim) throw std::invalid_argument("canonical embeddings do not match the bank dimension");
    }
    cache_[dim] = result;
    return result;
}

// -- Service -----------------------------------------------------------------------

struct Service::Impl {
    ServiceConfig config;
    std::shared_ptr<SceneRegistry> registry;
    std::shared_ptr<Embedder> text_embedder;
    std::unique_ptr<CanonicalProvider> canonical;
    httplib::Server server;

    Impl(ServiceConfig cfg, std::shared_ptr<SceneRegistry> reg) : config(std::move(cfg)), registry(std::move(reg)) {
        if (config.embedder_url) {
            text_embedder = std::make_shared<HttpEmbedder>(*config.embedder_url);
        } else if (config.mock_embedder) {
            text_embedder = nullptr;  // built per bank dimension in embed_texts
        }
        std::optional<CanonicalSet> file;
        if (config.canonical_file) file = read_canonical_file(*config.canonical_file);
        canonical = std::make_unique<CanonicalProvider>(std::move(file), text_embedder);
        routes();
    }

    std::vector<Embedding> embed_texts(const std::vector<std::string>& texts, std::size_t dim) {
        if (text_embedder) {
            auto out = text_embedder->embed(texts);
            for (const auto& e : out) {
                if (e.dim() != dim) throw HttpError{502, "embedder dimension does not match the scene bank"};
            }
            return out;
        }
        if (config.mock_embedder) return MockEmbedder(dim).embed(texts);
        throw HttpError{400, "text queries need an embedder; start the service with --embedder-url or send an embedding"};
    }

    std::shared_ptr<const SceneBundle> scene(const httplib::Request& req) {
        auto bundle = registry->find(req.matches[1]);
        if (!bundle) throw HttpError{404, "unknown scene '" + std::string(req.matches[1]) + "'"};
        return bundle;
    }

    static json parse_body(const httplib::Request& req) {
        if (req.body.empty()) return json::object();
        try {
            json body = json::parse(req.body);
            if (!body.is_object()) throw HttpError{400, "request body must be a JSON object"};
            return body;
        } catch (const json::exception& e) {
            throw HttpError{400, std::string("malformed JSON body: ") + e.what()};
        }
    }

    template <typename Fn>
    static void guarded(httplib::Response& res, Fn&& fn) {
        try {
            fn();
        } catch (const HttpError& e) {
            send_json(res, e.status, {{"error", e.message}});
        } catch (const EmbedderError& e) {
            send_json(res, 502, {{"error", e.what()}});
        } catch (const json::exception& e) {
            send_json(res, 400, {{"error", e.what()}});
        } catch (const std::invalid_argument& e) {
            send_json(res, 400, {{"error", e.what()}});
        } catch (const SceneError& e) {
            send_json(res, 400, {{"error", e.what()}});
        } catch (const std::exception& e) {
            send_json(res, 500, {{"error", e.what()}});
        }
    }

    void routes() {
        server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
            res.set_content("ok", "text/plain");
        });

        server.Get("/scenes", [this](const httplib::Request&, httplib::Response& res) {
            const auto start = Clock::now();
            const auto names = registry->names();
            send_json(res, 200, {{"scenes", names}, {"timing_ms", {{"total", elapsed_ms(start)}}}});
        });

        server.Post(R"(/scenes/([^/]+)/render)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { render(req, res); });
        });

        server.Post(R"(/scenes/([^/]+)/query)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { query(req, res); });
        });
    }

    void render(const httplib::Request& req, httplib::Response& res) {
        const auto start = Clock::now();
        const auto bundle = scene(req);
        const json body = parse_body(req);
        const PinholeCamera camera = request_camera(body, *bundle);

        auto t = Clock::now();
        const RenderOutput out = render_tiled(bundle->scene.gaussians, camera, config.engine.render);
        const double render_ms = elapsed_ms(t);
        t = Clock::now();
        const auto png = encode_png(to_rgb8(out.rgb));
        const double encode_ms = elapsed_ms(t);

        const std::string format = body.value("format", "png");
        if (format == "png") {
            res.set_header("X-Render-Ms", std::to_string(render_ms));
            res.set_header("X-Encode-Ms", std::to_string(encode_ms));
            res.set_header("X-Total-Ms", std::to_string(elapsed_ms(start)));
            res.set_content(to_string(png), "image/png");
            return;
        }
        if (format != "json") throw HttpError{400, "format must be 'png' or 'json'"};
        json payload = {{"width", out.width()}, {"height", out.height()}, {"png_base64", base64_encode(png)}};
        if (body.value("include_features", false)) {
            std::vector<float> flat;
            flat.reserve(out.feature.size() * 3);
            for (const Vec3f& f : out.feature.values()) flat.insert(flat.end(), {f.x(), f.y(), f.z()});
            payload["feature_base64"] = encode_f32_base64(flat);
            payload["alpha_base64"] = encode_f32_base64(out.alpha);
        }
        payload["timing_ms"] = {{"render", render_ms}, {"encode", encode_ms}, {"total", elapsed_ms(start)}};
        send_json(res, 200, payload);
    }

    /// One query embedding from {"embedding": [...]} or {"text": "..."}.
    std::optional<Embedding> single_query(const json& j, std::size_t dim, double& embed_ms) {
        if (j.contains("embedding")) return embedding_from(j.at("embedding"), dim);
        if (j.contains("text")) {
            const auto t = Clock::now();
            auto out = embed_texts({j.at("text").get<std::string>()}, dim);
            embed_ms += elapsed_ms(t);
            return out.front();
        }
        return std::nullopt;
    }

    void query(const httplib::Request& req, httplib::Response& res) {
        const auto start = Clock::now();
        const auto bundle = scene(req);
        if (!bundle->bank) throw HttpError{409, "scene has no memory bank"};
        const MemoryBank& bank = *bundle->bank;
        const json body = parse_body(req);

        const std::string mode = body.value("mode", "locate");
        if (mode != "locate" && mode != "segment" && mode != "multiclass")
            throw HttpError{400, "mode must be locate, segment or multiclass"};
        const double threshold = body.value("threshold", config.threshold);
        if (!(threshold > 0.0 && threshold < 1.0)) throw HttpError{400, "threshold must lie in (0,1)"};
        const PinholeCamera camera = request_camera(body, *bundle);

        double embed_ms = 0.0;
        std::vector<Embedding> embeddings;
        if (mode == "multiclass") {
            if (!body.contains("queries") || !body.at("queries").is_array() || body.at("queries").empty())
                throw HttpError{400, "multiclass mode needs a non-empty 'queries' array"};
            std::vector<std::string> texts;
            std::vector<std::size_t> text_slots;
            for (const auto& q : body.at("queries")) {
                if (q.contains("embedding")) {
                    embeddings.push_back(embedding_from(q.at("embedding"), bank.dim()));
                } else if (q.contains("text")) {
                    text_slots.push_back(embeddings.size());
                    texts.push_back(q.at("text").get<std::string>());
                    embeddings.push_back(Embedding::zeros(bank.dim()));
                } else {
                    throw HttpError{400, "each query needs an embedding or a text"};
                }
            }
            if (!texts.empty()) {
                const auto t = Clock::now();
                auto embedded = embed_texts(texts, bank.dim());
                embed_ms += elapsed_ms(t);
                for (std::size_t i = 0; i < texts.size(); ++i) embeddings[text_slots[i]] = std::move(embedded[i]);
            }
        } else {
            auto e = single_query(body, bank.dim(), embed_ms);
            if (!e) throw HttpError{400, "query needs an embedding or a text"};
            embeddings.push_back(std::move(*e));
        }

        auto t = Clock::now();
        const std::vector<Embedding> canon = canonical->get(bank.dim());
        embed_ms += elapsed_ms(t);
        std::vector<QuerySpec> specs;
        for (const auto& e : embeddings) specs.emplace_back(e, canon, threshold);

        const SnappedView view = render_and_snap(*bundle, camera, config.engine);
        json payload = {{"mode", mode},
                        {"width", camera.width()},
                        {"height", camera.height()},
                        {"unique_entries", view.snapped.unique.size()}};

        t = Clock::now();
        if (mode == "multiclass") {
            const ClassMap classes = segment_multiclass(view.snapped, bank, specs);
            std::vector<std::size_t> counts(specs.size() + 1, 0);
            for (auto c : classes.classes) ++counts[c];
            Image image{classes.width, classes.height, specs.size() < 256 ? PixelFormat::Gray8 : PixelFormat::Gray16,
                        classes.classes};
            payload["classes_png_base64"] = base64_encode(encode_png(image));
            payload["class_pixels"] = counts;
        } else {
            const RelevancyMap rm = relevancy_map(view.snapped, bank, specs.front());
            const RelevancyStats stats = relevancy_stats(rm, threshold);
            payload["stats"] = {{"min", stats.min}, {"max", stats.max}, {"mean", stats.mean},
                                {"above_threshold", stats.above_threshold}};
            if (mode == "locate") {
                const Pixel p = localize(rm);
                payload["point"] = {{"x", p.x}, {"y", p.y}};
                payload["score"] = rm.at(p.x, p.y);
            } else {
                const auto mask = segment(rm, threshold);
                payload["mask_png_base64"] = base64_encode(encode_png(mask_image(rm.width(), rm.height(), mask)));
                payload["selected_pixels"] = stats.above_threshold;
                payload["threshold"] = threshold;
            }
            if (body.value("include_relevancy", false)) {
                const std::vector<float> scores(rm.scores().begin(), rm.scores().end());
                payload["relevancy_base64"] = encode_f32_base64(scores);
            }
        }
        const double score_ms = elapsed_ms(t);
        payload["timing_ms"] = {{"embed", embed_ms},
                                {"render", view.render_ms},
                                {"snap", view.snap_ms},
                                {"score", score_ms},
                                {"query", view.snap_ms + score_ms},
                                {"total", elapsed_ms(start)}};
        send_json(res, 200, payload);
    }
};

Service::Service(ServiceConfig config, std::shared_ptr<SceneRegistry> registry)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(registry))) {}

Service::~Service() { stop(); }

int Service::bind() {
    auto& cfg = impl_->config;
    if (cfg.port == 0) {
        const int port = impl_->server.bind_to_any_port(cfg.host);
        if (port < 0) throw std::runtime_error("cannot bind " + cfg.host);
        cfg.port = port;
        return port;
    }
    if (!impl_->server.bind_to_port(cfg.host, cfg.port))
        throw std::runtime_error("cannot bind " + cfg.host + ":" + std::to_string(cfg.port));
    return cfg.port;
}

void Service::run() { impl_->server.listen_after_bind(); }

void Service::stop() {
    if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace semsplat::io
