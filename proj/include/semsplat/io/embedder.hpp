#pragma once

#include "semsplat/memory_bank.hpp"
#include "semsplat/scene_model.hpp"

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace semsplat::io {

/// The external text encoder could not be reached or answered badly.
class EmbedderError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Embedder {
public:
    virtual ~Embedder() = default;
    /// One unit-norm embedding per text.
    virtual std::vector<Embedding> embed(std::span<const std::string> texts) = 0;
};

/// Deterministic offline stand-in: FNV-1a of the text, mixed with the seed,
/// drives a SplitMix64 stream of uniform components which are normalized.
class MockEmbedder final : public Embedder {
public:
    explicit MockEmbedder(std::size_t dim = Embedding::kDefaultDim, std::uint64_t seed = kDefaultSeed);
    std::vector<Embedding> embed(std::span<const std::string> texts) override;
    Embedding embed_one(const std::string& text) const;

private:
    std::size_t dim_;
    std::uint64_t seed_;
};

/// Client for `POST {base}/embed` with body {"texts": [...]} answering
/// {"embeddings": [[f32, ...], ...]}.
class HttpEmbedder final : public Embedder {
public:
    /// `url` is "http://host:port" optionally followed by a path prefix.
    explicit HttpEmbedder(std::string url, double timeout_seconds = 10.0);
    std::vector<Embedding> embed(std::span<const std::string> texts) override;

private:
    std::string origin_;
    std::string prefix_;
    double timeout_seconds_;
};

}  // namespace semsplat::io
