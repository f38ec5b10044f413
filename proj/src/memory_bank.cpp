#include "semsplat/memory_bank.hpp"

#include "semsplat/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace semsplat {

int lattice_points_per_axis(std::size_t n) {
    if (n == 0) throw std::invalid_argument("lattice needs at least one point");
    int m = 1;
    while (static_cast<std::size_t>(m) * m * m < n) ++m;
    return m;
}

std::vector<Vec3f> lattice_points(int m) {
    if (m < 1) throw std::invalid_argument("lattice needs m >= 1");
    if (m == 1) return {Vec3f::Constant(0.5f)};
    std::vector<float> coords(m);
    for (int k = 0; k < m; ++k) coords[k] = static_cast<float>(static_cast<double>(k) / (m - 1));
    std::vector<Vec3f> points;
    points.reserve(static_cast<std::size_t>(m) * m * m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            for (int k = 0; k < m; ++k) points.emplace_back(coords[i], coords[j], coords[k]);
    return points;
}

std::vector<Vec3f> generate_ids(std::size_t n, std::uint64_t seed) {
    const std::vector<Vec3f> lattice = lattice_points(lattice_points_per_axis(n));
    std::vector<std::uint32_t> order(lattice.size());
    std::iota(order.begin(), order.end(), 0u);
    // Partial Fisher-Yates: the first n slots are a uniform n-subset in
    // uniformly random order.
    SplitMix64 rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(order.size() - i));
        std::swap(order[i], order[j]);
    }
    std::vector<Vec3f> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = lattice[order[i]];
    return ids;
}

double l1_distance(const Vec3f& a, const Vec3f& b) {
    const Vec3d d = a.cast<double>() - b.cast<double>();
    return std::abs(d.x()) + std::abs(d.y()) + std::abs(d.z());
}

// -- MemoryBank --------------------------------------------------------------

MemoryBank::MemoryBank(std::size_t dim, int views, std::uint64_t seed, std::vector<BankEntry> entries)
    : dim_(dim), views_(views), seed_(seed), lattice_m_(0), entries_(std::move(entries)) {
    if (entries_.empty()) throw SceneError("memory bank: no entries");
    if (views < 1) throw SceneError("memory bank: need at least one view");
    if (dim == 0) throw SceneError("memory bank: embedding dimension must be positive");
    lattice_m_ = lattice_points_per_axis(entries_.size());

    std::set<std::tuple<float, float, float>> seen;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const BankEntry& e = entries_[i];
        std::ostringstream where;
        where << "memory bank: entry " << i << ": ";
        if (e.label != i + 1) throw SceneError(where.str() + "labels must be exactly 1..N in order");
        if (!e.id.allFinite() || (e.id.array() < 0.0f).any() || (e.id.array() > 1.0f).any())
            throw SceneError(where.str() + "ID outside [0,1]^3");
        if (!seen.emplace(e.id.x(), e.id.y(), e.id.z()).second)
            throw SceneError(where.str() + "duplicate ID");
        if (e.views.size() != static_cast<std::size_t>(views))
            throw SceneError(where.str() + "wrong number of view embeddings");
        for (const Embedding& v : e.views) {
            if (v.dim() != dim) throw SceneError(where.str() + "embedding dimension mismatch");
            if (!v.is_zero() && std::abs(v.norm() - 1.0) > 1e-5)
                throw SceneError(where.str() + "embedding is not unit norm");
        }
    }
    build_grid();
}

std::int32_t MemoryBank::index_of(std::uint16_t label) const {
    if (label == 0 || label > entries_.size()) return kBackgroundEntry;
    return static_cast<std::int32_t>(label) - 1;
}

std::int32_t MemoryBank::nearest_of(const Vec3f& feature, std::span<const std::int32_t> candidates) const {
    // Candidates are in ascending entry order with the background last, so a
    // strict < gives the documented tie rules.
    std::int32_t best = kBackgroundEntry;
    double best_distance = std::numeric_limits<double>::infinity();
    for (std::int32_t c : candidates) {
        const Vec3f& target = c == kBackgroundEntry ? background() : entries_[c].id;
        const double d = l1_distance(feature, target);
        if (d < best_distance) {
            best_distance = d;
            best = c;
        }
    }
    return best;
}

std::int32_t MemoryBank::apply_rejection(const Vec3f& feature, std::int32_t best,
                                         const SnapOptions& options) const {
    if (!options.reject_far || best == kBackgroundEntry) return best;
    return l1_distance(feature, entries_[best].id) > 0.5 * spacing() ? kBackgroundEntry : best;
}

std::int32_t MemoryBank::snap_index_linear(const Vec3f& feature, const SnapOptions& options) const {
    return apply_rejection(feature, nearest_of(feature, all_candidates_), options);
}

std::int32_t MemoryBank::snap_index(const Vec3f& feature, const SnapOptions& options) const {
    const Vec3f scaled = feature * static_cast<float>(grid_);
    if (grid_ == 0 ||
        !((scaled.array() >= 0.0f).all() && (scaled.array() < static_cast<float>(grid_)).all()))
        return snap_index_linear(feature, options);
    const int cx = static_cast<int>(scaled.x());
    const int cy = static_cast<int>(scaled.y());
    const int cz = static_cast<int>(scaled.z());
    const std::size_t cell = (static_cast<std::size_t>(cx) * grid_ + cy) * grid_ + cz;
    const std::span<const std::int32_t> candidates(cell_candidates_.data() + cell_offsets_[cell],
                                                   cell_offsets_[cell + 1] - cell_offsets_[cell]);
    return apply_rejection(feature, nearest_of(feature, candidates), options);
}

void MemoryBank::build_grid() {
    all_candidates_.resize(entries_.size());
    std::iota(all_candidates_.begin(), all_candidates_.end(), 0);
    all_candidates_.push_back(kBackgroundEntry);

    // For each cell keep every target whose smallest possible distance to
    // the cell does not exceed the smallest worst-case distance of any
    // target; the true nearest is always among them.
    if (entries_.size() > kMaxGridEntries) {
        grid_ = 0;
        return;
    }
    grid_ = std::clamp(3 * lattice_m_, 4, 32);
    const double step = 1.0 / grid_;
    cell_offsets_.assign(static_cast<std::size_t>(grid_) * grid_ * grid_ + 1, 0);
    cell_candidates_.clear();
    std::vector<double> lower(all_candidates_.size());
    std::size_t cell = 0;
    for (int i = 0; i < grid_; ++i) {
        for (int j = 0; j < grid_; ++j) {
            for (int k = 0; k < grid_; ++k, ++cell) {
                const Vec3d lo(i * step, j * step, k * step);
                const Vec3d hi = lo + Vec3d::Constant(step);
                double bound = std::numeric_limits<double>::infinity();
                for (std::size_t c = 0; c < all_candidates_.size(); ++c) {
                    const Vec3d p = (all_candidates_[c] == kBackgroundEntry ? background()
                                                                           : entries_[all_candidates_[c]].id)
                                        .cast<double>();
                    double dmin = 0.0;
                    double dmax = 0.0;
                    for (int a = 0; a < 3; ++a) {
                        dmin += std::max({0.0, lo[a] - p[a], p[a] - hi[a]});
                        dmax += std::max(std::abs(p[a] - lo[a]), std::abs(p[a] - hi[a]));
                    }
                    lower[c] = dmin;
                    bound = std::min(bound, dmax);
                }
                for (std::size_t c = 0; c < all_candidates_.size(); ++c) {
                    if (lower[c] <= bound + 1e-5) cell_candidates_.push_back(all_candidates_[c]);
                }
                cell_offsets_[cell + 1] = static_cast<std::uint32_t>(cell_candidates_.size());
            }
        }
    }
}

const BankEntry* snap(const Vec3f& feature, const MemoryBank& bank, const SnapOptions& options) {
    const std::int32_t index = bank.snap_index(feature, options);
    return index == kBackgroundEntry ? nullptr : &bank.entry(static_cast<std::size_t>(index));
}

// -- construction --------------------------------------------------------------

MemoryBank build_bank(std::span<const LabelMap> maps, const ViewEmbeddings& embeddings,
                      std::uint64_t seed, std::size_t dim) {
    if (maps.empty()) throw SceneError("build_bank: no label maps");
    std::vector<bool> used(65536, false);
    std::uint16_t max_label = 0;
    for (const auto& m : maps) {
        for (std::uint16_t label : m.labels()) {
            used[label] = true;
            max_label = std::max(max_label, label);
        }
    }
    if (max_label == 0) throw SceneError("build_bank: label maps contain no objects");
    for (std::uint16_t label = 1; label <= max_label; ++label) {
        if (!used[label]) throw SceneError("build_bank: labels are not contiguous 1..N; compact them first");
    }

    if (dim == 0) dim = embeddings.empty() ? Embedding::kDefaultDim : embeddings.begin()->second.dim();
    const int views = static_cast<int>(maps.size());
    for (const auto& [key, embedding] : embeddings) {
        const auto [view, label] = key;
        std::ostringstream where;
        where << "build_bank: embedding (view " << view << ", label " << label << "): ";
        if (view < 0 || view >= views) throw SceneError(where.str() + "view out of range");
        if (label < 1 || label > max_label) throw SceneError(where.str() + "label out of range");
        if (embedding.dim() != dim) throw SceneError(where.str() + "dimension mismatch");
    }

    const std::vector<Vec3f> ids = generate_ids(max_label, seed);
    std::vector<BankEntry> entries(max_label);
    for (std::uint16_t label = 1; label <= max_label; ++label) {
        BankEntry& e = entries[label - 1];
        e.label = label;
        e.id = ids[label - 1];
        e.views.reserve(views);
        for (int view = 0; view < views; ++view) {
            const auto it = embeddings.find({view, label});
            e.views.push_back(it == embeddings.end() ? Embedding::zeros(dim) : it->second.normalized());
        }
    }
    return MemoryBank(dim, views, seed, std::move(entries));
}

FeatureMap label_image(const LabelMap& map, const MemoryBank& bank) {
    FeatureMap out(map.width(), map.height());
    const auto labels = map.labels();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 0) {
            out[i] = MemoryBank::background();
            continue;
        }
        const std::int32_t index = bank.index_of(labels[i]);
        if (index == kBackgroundEntry) {
            throw SceneError("label_image: label " + std::to_string(labels[i]) + " is not in the bank");
        }
        out[i] = bank.entry(static_cast<std::size_t>(index)).id;
    }
    return out;
}

SnappedMap snap_map(const FeatureMap& fm, const MemoryBank& bank, const SnapOptions& options,
                    unsigned threads) {
    SnappedMap out;
    out.width = fm.width();
    out.height = fm.height();
    out.entry.resize(fm.size());
    const std::size_t rows = static_cast<std::size_t>(fm.height());
    const std::size_t width = static_cast<std::size_t>(fm.width());
    constexpr std::size_t kRowsPerTask = 16;
    parallel_for((rows + kRowsPerTask - 1) / kRowsPerTask, threads, [&](std::size_t task) {
        const std::size_t begin = task * kRowsPerTask * width;
        const std::size_t end = std::min(rows, (task + 1) * kRowsPerTask) * width;
        for (std::size_t i = begin; i < end; ++i) out.entry[i] = bank.snap_index(fm[i], options);
    });

    std::vector<bool> hit(bank.size(), false);
    for (std::int32_t e : out.entry) {
        if (e == kBackgroundEntry) {
            out.has_background = true;
        } else {
            hit[static_cast<std::size_t>(e)] = true;
        }
    }
    for (std::size_t i = 0; i < hit.size(); ++i) {
        if (hit[i]) out.unique.push_back(static_cast<std::int32_t>(i));
    }
    return out;
}

}  // namespace semsplat
