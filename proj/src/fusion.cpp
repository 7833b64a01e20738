#include "facret/fusion.hpp"

#include "facret/errors.hpp"

#include <unordered_map>

namespace facret {

RankedList fuse(const RankedList& primary, const RankedList& secondary, const FusionParams& params) {
    const int eta = params.eta;
    if (eta < 1) {
        throw InvalidArgument("eta must be at least 1");
    }
    if (params.alpha < 0 || params.alpha > eta) {
        throw InvalidArgument("alpha " + std::to_string(params.alpha) + " outside [0, eta]");
    }
    if (primary.size() > static_cast<std::size_t>(eta) ||
        secondary.size() > static_cast<std::size_t>(eta)) {
        throw InvalidArgument("ranked lists longer than eta");
    }

    std::unordered_map<std::string, int> secondary_rank;
    for (std::size_t i = 0; i < secondary.entries.size(); ++i) {
        secondary_rank.emplace(secondary.entries[i].object_id, static_cast<int>(i) + 1);
    }
    auto rank_in_secondary = [&](const RankedEntry& e) {
        auto it = secondary_rank.find(e.object_id);
        return it == secondary_rank.end() ? eta + 1 : it->second;
    };

    RankedList out{primary.entries, eta};
    auto& list = out.entries;
    const int len = static_cast<int>(list.size());
    const long long max_passes = static_cast<long long>(eta) * eta;

    bool swapped = true;
    for (long long pass = 0; swapped && pass < max_passes; ++pass) {
        swapped = false;
        // 1-based positions; 2*i < eta is i < eta/2 without rounding.
        for (int i = 1; 2 * i < eta; ++i) {
            for (int j = 1; j <= eta - i && i + j <= len; ++j) {
                const int a = rank_in_secondary(list[i - 1]);
                const int b = rank_in_secondary(list[i + j - 1]);
                if (a > b + params.alpha + j) {
                    std::swap(list[i - 1], list[i + j - 1]);
                    swapped = true;
                }
            }
        }
    }
    return out;
}

} // namespace facret
