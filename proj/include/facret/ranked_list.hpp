#pragma once

#include <string>
#include <vector>

namespace facret {

struct RankedEntry {
    std::string object_id;
    std::string image_id;
    double score = 0.0;

    bool operator==(const RankedEntry& other) const = default;
};

/// Object-deduplicated top-η list, best first under the metric that produced
/// it (ascending angle, descending correlation score).
struct RankedList {
    std::vector<RankedEntry> entries;
    int eta = 0;

    std::size_t size() const { return entries.size(); }

    /// 1-based rank of `object_id`, or 0 when absent.
    int rank_of(const std::string& object_id) const;

    std::vector<std::string> object_ids() const;

    bool operator==(const RankedList& other) const = default;
};

} // namespace facret
