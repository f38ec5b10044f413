#include "semsplat/io/bank_file.hpp"

#include "semsplat/io/base64.hpp"

#include <json.hpp>

namespace semsplat::io {
namespace {

using nlohmann::json;

std::string slurp(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return {bytes.begin(), bytes.end()};
}

json parse(const std::string& text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string(what) + ": invalid JSON: " + e.what());
    }
}

template <typename Fn>
auto guarded(const char* what, Fn&& fn) {
    try {
        return fn();
    } catch (const json::exception& e) {
        throw FormatError(std::string(what) + ": " + e.what());
    }
}

}  // namespace

std::string encode_bank(const MemoryBank& bank) {
    json doc;
    doc["format"] = "semsplat-bank";
    doc["version"] = kBankFormatVersion;
    doc["seed"] = bank.seed();
    doc["lattice_m"] = bank.lattice_m();
    doc["dim"] = bank.dim();
    doc["views"] = bank.views();
    json entries = json::array();
    for (const BankEntry& e : bank.entries()) {
        json views = json::array();
        for (const Embedding& v : e.views) {
            views.push_back(v.is_zero() ? json(nullptr) : json(encode_f32_base64(v.values())));
        }
        entries.push_back({{"label", e.label}, {"id", {e.id.x(), e.id.y(), e.id.z()}}, {"views", views}});
    }
    doc["entries"] = std::move(entries);
    return doc.dump(1);
}

MemoryBank decode_bank(const std::string& text) {
    const json doc = parse(text, "bank file");
    return guarded("bank file", [&] {
        if (doc.at("format").get<std::string>() != "semsplat-bank") throw FormatError("bank file: wrong format tag");
        if (doc.at("version").get<int>() != kBankFormatVersion) throw FormatError("bank file: unsupported version");
        const auto seed = doc.at("seed").get<std::uint64_t>();
        const auto dim = doc.at("dim").get<std::size_t>();
        const int views = doc.at("views").get<int>();
        const auto& items = doc.at("entries");
        if (items.empty()) throw FormatError("bank file: no entries");

        const std::vector<Vec3f> expected = generate_ids(items.size(), seed);
        if (doc.at("lattice_m").get<int>() != lattice_points_per_axis(items.size()))
            throw FormatError("bank file: lattice_m does not match entry count");

        std::vector<BankEntry> entries;
        entries.reserve(items.size());
        for (const auto& item : items) {
            BankEntry e;
            e.label = item.at("label").get<std::uint16_t>();
            const auto id = item.at("id").get<std::vector<float>>();
            if (id.size() != 3) throw FormatError("bank file: ID must have 3 components");
            e.id = Vec3f(id[0], id[1], id[2]);
            if (e.label < 1 || e.label > expected.size() || e.id != expected[e.label - 1u])
                throw FormatError("bank file: entry " + std::to_string(e.label) +
                                  " does not match the IDs generated from the stored seed");
            for (const auto& v : item.at("views")) {
                if (v.is_null()) {
                    e.views.push_back(Embedding::zeros(dim));
                } else {
                    e.views.emplace_back(decode_f32_base64(v.get<std::string>()));
                }
            }
            entries.push_back(std::move(e));
        }
        try {
            return MemoryBank(dim, views, seed, std::move(entries));
        } catch (const SceneError& e) {
            throw FormatError(std::string("bank file: ") + e.what());
        }
    });
}

void write_bank_file(const std::filesystem::path& path, const MemoryBank& bank) {
    const std::string text = encode_bank(bank);
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

MemoryBank read_bank_file(const std::filesystem::path& path) {
    try {
        return decode_bank(slurp(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

ViewEmbeddings decode_view_embeddings(const std::string& text) {
    const json doc = parse(text, "embeddings file");
    return guarded("embeddings file", [&] {
        const auto dim = doc.at("dim").get<std::size_t>();
        ViewEmbeddings out;
        for (const auto& record : doc.at("records")) {
            const int view = record.at("view").get<int>();
            const auto label = record.at("label").get<std::uint16_t>();
            Embedding e(record.at("embedding").get<std::vector<float>>());
            if (e.dim() != dim) throw FormatError("embeddings file: record dimension differs from header");
            if (!out.emplace(std::make_pair(view, label), std::move(e)).second)
                throw FormatError("embeddings file: duplicate (view, label) record");
        }
        return out;
    });
}

std::string encode_view_embeddings(const ViewEmbeddings& embeddings) {
    json doc;
    doc["dim"] = embeddings.empty() ? Embedding::kDefaultDim : embeddings.begin()->second.dim();
    json records = json::array();
    for (const auto& [key, e] : embeddings) {
        records.push_back({{"view", key.first}, {"label", key.second},
                           {"embedding", std::vector<float>(e.values().begin(), e.values().end())}});
    }
    doc["records"] = std::move(records);
    return doc.dump();
}

ViewEmbeddings read_view_embeddings(const std::filesystem::path& path) {
    return decode_view_embeddings(slurp(path));
}

CanonicalSet decode_canonical(const std::string& text) {
    const json doc = parse(text, "canonical file");
    return guarded("canonical file", [&] {
        CanonicalSet set;
        set.phrases = doc.at("phrases").get<std::vector<std::string>>();
        for (const auto& e : doc.at("embeddings")) set.embeddings.emplace_back(e.get<std::vector<float>>());
        if (set.phrases.size() != set.embeddings.size())
            throw FormatError("canonical file: phrase and embedding counts differ");
        if (set.embeddings.empty()) throw FormatError("canonical file: no phrases");
        return set;
    });
}

std::string encode_canonical(const CanonicalSet& set) {
    json doc;
    doc["phrases"] = set.phrases;
    json embeddings = json::array();
    for (const auto& e : set.embeddings) embeddings.push_back(std::vector<float>(e.values().begin(), e.values().end()));
    doc["embeddings"] = std::move(embeddings);
    return doc.dump();
}

CanonicalSet read_canonical_file(const std::filesystem::path& path) { return decode_canonical(slurp(path)); }

}  // namespace semsplat::io
