#include "semsplat/mask_association.hpp"

#include <algorithm>

namespace semsplat {

ReplicatedSequence::ReplicatedSequence(int views, int replicates, std::vector<LabelMap> maps)
    : views_(views), replicates_(replicates), maps_(std::move(maps)) {
    if (views < 1 || replicates < 1) throw SceneError("replicated sequence: need V >= 1 and K >= 1");
    if (maps_.size() != static_cast<std::size_t>(views) * static_cast<std::size_t>(replicates))
        throw SceneError("replicated sequence: expected V*K label maps");
    for (const auto& m : maps_) {
        if (m.width() != maps_.front().width() || m.height() != maps_.front().height())
            throw SceneError("replicated sequence: label maps differ in size");
    }
}

std::vector<LabelMap> vote(const ReplicatedSequence& seq) {
    const int k = seq.replicates();
    std::vector<LabelMap> out;
    out.reserve(seq.views());
    std::vector<std::uint16_t> votes(k);
    for (int view = 0; view < seq.views(); ++view) {
        LabelMap voted(seq.width(), seq.height());
        auto dst = voted.labels();
        for (std::size_t px = 0; px < dst.size(); ++px) {
            for (int j = 0; j < k; ++j) votes[j] = seq.map(view, j).labels()[px];
            // After sorting, runs are counted in ascending label order, so a
            // strict > keeps the smallest label among equally frequent ones.
            std::sort(votes.begin(), votes.end());
            std::uint16_t best = votes[0];
            int best_count = 0;
            for (int j = 0; j < k;) {
                int run = j;
                while (run < k && votes[run] == votes[j]) ++run;
                if (run - j > best_count) {
                    best_count = run - j;
                    best = votes[j];
                }
                j = run;
            }
            dst[px] = best;
        }
        out.push_back(std::move(voted));
    }
    return out;
}

CompactedLabels compact_labels(std::span<const LabelMap> maps) {
    CompactedLabels result;
    std::vector<std::int32_t> remap(65536, -1);
    remap[0] = 0;
    result.table[0] = 0;
    for (const auto& m : maps) {
        for (std::uint16_t label : m.labels()) {
            if (remap[label] >= 0) continue;
            remap[label] = ++result.count;
            result.table[label] = result.count;
        }
    }
    result.maps.reserve(maps.size());
    for (const auto& m : maps) {
        LabelMap renamed = m;
        for (auto& label : renamed.labels()) label = static_cast<std::uint16_t>(remap[label]);
        result.maps.push_back(std::move(renamed));
    }
    return result;
}

std::map<std::uint16_t, LabelPresence> consistency_report(std::span<const LabelMap> maps) {
    std::map<std::uint16_t, LabelPresence> report;
    for (std::size_t view = 0; view < maps.size(); ++view) {
        for (std::uint16_t label : maps[view].labels()) {
            if (label == 0) continue;
            auto& entry = report[label];
            if (entry.pixels.empty()) entry.pixels.assign(maps.size(), 0);
            ++entry.pixels[view];
        }
    }
    return report;
}

}  // namespace semsplat
