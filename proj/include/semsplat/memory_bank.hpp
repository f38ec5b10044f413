#pragma once

#include "semsplat/parallel.hpp"
#include "semsplat/scene_model.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

namespace semsplat {

inline constexpr std::uint64_t kDefaultSeed = 0x5eedULL;
/// Entry index reported for pixels that snap to the reserved background.
inline constexpr std::int32_t kBackgroundEntry = -1;

/// Smallest m with m^3 >= n.
int lattice_points_per_axis(std::size_t n);

/// All m^3 points of the evenly spaced lattice on [0,1]^3, endpoints
/// included, enumerated x-major. m == 1 yields the cube center.
std::vector<Vec3f> lattice_points(int m);

/// n distinct lattice points drawn uniformly without replacement.
/// Deterministic in (n, seed). Throws std::invalid_argument for n == 0.
std::vector<Vec3f> generate_ids(std::size_t n, std::uint64_t seed);

/// Evaluated in double: float sums break the exact ties that are common
/// outside the unit cube.
double l1_distance(const Vec3f& a, const Vec3f& b);

struct BankEntry {
    std::uint16_t label = 0;
    Vec3f id;
    /// One embedding per view; an all-zero vector means absent from that view.
    std::vector<Embedding> views;
};

struct SnapOptions {
    /// When set, features farther than half the lattice spacing from every
    /// ID snap to background.
    bool reject_far = false;
};

class MemoryBank {
public:
    /// Reserved vector for unlabeled pixels; lies outside [0,1]^3.
    static Vec3f background() { return Vec3f::Constant(-1.0f); }

    /// Validates the stored invariants and builds the lookup grid. Entries
    /// must carry labels 1..N in order.
    MemoryBank(std::size_t dim, int views, std::uint64_t seed, std::vector<BankEntry> entries);

    std::size_t dim() const { return dim_; }
    int views() const { return views_; }
    std::uint64_t seed() const { return seed_; }
    int lattice_m() const { return lattice_m_; }
    /// Distance between neighboring lattice points (1 when m == 1).
    float spacing() const { return lattice_m_ >= 2 ? 1.0f / static_cast<float>(lattice_m_ - 1) : 1.0f; }
    std::size_t size() const { return entries_.size(); }
    const std::vector<BankEntry>& entries() const { return entries_; }
    const BankEntry& entry(std::size_t index) const { return entries_[index]; }
    /// Entry index for a label, or kBackgroundEntry for 0 / unknown labels.
    std::int32_t index_of(std::uint16_t label) const;

    /// Index of the entry whose ID is nearest in L1, or kBackgroundEntry.
    /// Ties go to the smallest label; the background loses every tie.
    std::int32_t snap_index(const Vec3f& feature, const SnapOptions& options = {}) const;
    /// Same as snap_index, scanning every candidate.
    std::int32_t snap_index_linear(const Vec3f& feature, const SnapOptions& options = {}) const;

private:
    std::int32_t nearest_of(const Vec3f& feature, std::span<const std::int32_t> candidates) const;
    std::int32_t apply_rejection(const Vec3f& feature, std::int32_t best, const SnapOptions& options) const;
    void build_grid();

    std::size_t dim_;
    int views_;
    std::uint64_t seed_;
    int lattice_m_;
    std::vector<BankEntry> entries_;

    /// Above this many entries every lookup is a linear scan.
    static constexpr std::size_t kMaxGridEntries = 4096;
    int grid_ = 0;
    std::vector<std::uint32_t> cell_offsets_;
    std::vector<std::int32_t> cell_candidates_;
    std::vector<std::int32_t> all_candidates_;
};

/// Snapped entry, or nullptr for background.
const BankEntry* snap(const Vec3f& feature, const MemoryBank& bank, const SnapOptions& options = {});

/// Embeddings keyed by (view, label).
using ViewEmbeddings = std::map<std::pair<int, std::uint16_t>, Embedding>;

/// One entry per label 1..N of the compacted maps. Missing (view, label)
/// pairs become zero sentinels; others are L2-normalized. `dim` of 0 infers
/// the dimension from the embeddings (512 when there are none).
MemoryBank build_bank(std::span<const LabelMap> maps, const ViewEmbeddings& embeddings,
                      std::uint64_t seed, std::size_t dim = 0);

/// Replaces every label with its bank ID; label 0 becomes MemoryBank::background().
FeatureMap label_image(const LabelMap& map, const MemoryBank& bank);

struct SnappedMap {
    int width = 0;
    int height = 0;
    /// Entry index per pixel, kBackgroundEntry for background.
    std::vector<std::int32_t> entry;
    /// Distinct entry indices hit, ascending.
    std::vector<std::int32_t> unique;
    bool has_background = false;
};

SnappedMap snap_map(const FeatureMap& fm, const MemoryBank& bank, const SnapOptions& options = {},
                    unsigned threads = default_thread_count());

}  // namespace semsplat
