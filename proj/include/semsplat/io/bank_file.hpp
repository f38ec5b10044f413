#pragma once

#include "semsplat/io/png_io.hpp"
#include "semsplat/memory_bank.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace semsplat::io {

inline constexpr int kBankFormatVersion = 1;

/// JSON document:
///   {"format": "semsplat-bank", "version": 1, "seed": u64, "lattice_m": m,
///    "dim": D, "views": V,
///    "entries": [{"label": 1, "id": [x, y, z], "views": ["<b64 f32 LE>" | null, ...]}]}
/// A null view is the zero sentinel.
std::string encode_bank(const MemoryBank& bank);
/// Checks the stored IDs against the ones regenerated from the seed.
MemoryBank decode_bank(const std::string& text);

void write_bank_file(const std::filesystem::path& path, const MemoryBank& bank);
MemoryBank read_bank_file(const std::filesystem::path& path);

/// Region embeddings emitted by the preprocessing sidecar:
///   {"dim": D, "records": [{"view": 0, "label": 3, "embedding": [f32, ...]}]}
/// Labels refer to the compacted label maps written by `associate`.
ViewEmbeddings decode_view_embeddings(const std::string& text);
std::string encode_view_embeddings(const ViewEmbeddings& embeddings);
ViewEmbeddings read_view_embeddings(const std::filesystem::path& path);

struct CanonicalSet {
    std::vector<std::string> phrases;
    std::vector<Embedding> embeddings;
};

/// {"phrases": ["object", ...], "embeddings": [[f32, ...], ...]}
CanonicalSet decode_canonical(const std::string& text);
std::string encode_canonical(const CanonicalSet& set);
CanonicalSet read_canonical_file(const std::filesystem::path& path);

}  // namespace semsplat::io
