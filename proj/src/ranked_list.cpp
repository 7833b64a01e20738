#include "facret/ranked_list.hpp"

namespace facret {

int RankedList::rank_of(const std::string& object_id) const {
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].object_id == object_id) {
            return static_cast<int>(i) + 1;
        }
    }
    return 0;
}

std::vector<std::string> RankedList::object_ids() const {
    std::vector<std::string> ids;
    ids.reserve(entries.size());
    for (const auto& e : entries) {
        ids.push_back(e.object_id);
    }
    return ids;
}

} // namespace facret
