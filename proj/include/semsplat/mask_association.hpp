#pragma once

#include "semsplat/scene_model.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace semsplat {

inline constexpr int kDefaultReplicates = 5;

/// V views x K replicate tracker outputs sharing one label namespace.
/// Maps are stored view-major: maps[view * K + replicate].
class ReplicatedSequence {
public:
    ReplicatedSequence(int views, int replicates, std::vector<LabelMap> maps);

    int views() const { return views_; }
    int replicates() const { return replicates_; }
    int width() const { return maps_.front().width(); }
    int height() const { return maps_.front().height(); }
    const LabelMap& map(int view, int replicate) const {
        return maps_[static_cast<std::size_t>(view) * replicates_ + replicate];
    }

private:
    int views_;
    int replicates_;
    std::vector<LabelMap> maps_;
};

/// Per-pixel mode over replicates for every view. Ties go to the smallest label.
std::vector<LabelMap> vote(const ReplicatedSequence& seq);

struct CompactedLabels {
    std::vector<LabelMap> maps;
    /// old label -> new label, covering 0 and every label in use.
    std::map<std::uint16_t, std::uint16_t> table;
    /// Number of distinct non-zero labels.
    std::uint16_t count = 0;
};

/// Renumbers labels to 1..N in order of first appearance (view-major,
/// row-major). 0 stays 0.
CompactedLabels compact_labels(std::span<const LabelMap> maps);

struct LabelPresence {
    /// Pixel count per view; 0 means absent.
    std::vector<std::size_t> pixels;

    bool present_in(std::size_t view) const { return pixels[view] > 0; }
};

/// Per non-zero label, how many pixels each view assigns to it.
std::map<std::uint16_t, LabelPresence> consistency_report(std::span<const LabelMap> maps);

}  // namespace semsplat
