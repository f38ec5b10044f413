#include "semsplat/io/embedder.hpp"

#include "semsplat/rng.hpp"

#include <httplib.h>
#include <json.hpp>

namespace semsplat::io {

MockEmbedder::MockEmbedder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim == 0) throw std::invalid_argument("mock embedder: dimension must be positive");
}

Embedding MockEmbedder::embed_one(const std::string& text) const {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    SplitMix64 rng(hash ^ seed_);
    std::vector<float> values(dim_);
    for (float& v : values) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    return Embedding(std::move(values)).normalized();
}

std::vector<Embedding> MockEmbedder::embed(std::span<const std::string> texts) {
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_one(t));
    return out;
}

HttpEmbedder::HttpEmbedder(std::string url, double timeout_seconds) : timeout_seconds_(timeout_seconds) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos) throw std::invalid_argument("embedder URL must start with http://");
    const auto path = url.find('/', scheme + 3);
    origin_ = url.substr(0, path);
    prefix_ = path == std::string::npos ? "" : url.substr(path);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
}

std::vector<Embedding> HttpEmbedder::embed(std::span<const std::string> texts) {
    httplib::Client client(origin_);
    const auto seconds = static_cast<time_t>(timeout_seconds_);
    const auto micros = static_cast<time_t>((timeout_seconds_ - seconds) * 1e6);
    client.set_connection_timeout(seconds, micros);
    client.set_read_timeout(seconds, micros);

    const nlohmann::json body = {{"texts", std::vector<std::string>(texts.begin(), texts.end())}};
    const auto response = client.Post(prefix_ + "/embed", body.dump(), "application/json");
    if (!response) throw EmbedderError("embedder unreachable at " + origin_ + ": " + httplib::to_string(response.error()));
    if (response->status != 200)
        throw EmbedderError("embedder returned HTTP " + std::to_string(response->status));

    std::vector<Embedding> out;
    try {
        const auto doc = nlohmann::json::parse(response->body);
        for (const auto& e : doc.at("embeddings")) out.push_back(Embedding(e.get<std::vector<float>>()).normalized());
    } catch (const std::exception& e) {
        throw EmbedderError(std::string("embedder sent a malformed response: ") + e.what());
    }
    if (out.size() != texts.size()) throw EmbedderError("embedder returned the wrong number of embeddings");
    for (const auto& e : out) {
        if (e.is_zero() || e.dim() != out.front().dim()) throw EmbedderError("embedder returned an invalid embedding");
    }
    return out;
}

}  // namespace semsplat::io
