#pragma once

// Straight transcription of the reordering procedure (while-loops, linear
// secondary lookups) used as an independent check on fuse().

#include "facret/ranked_list.hpp"
#include "facret/rng.hpp"

#include <string>
#include <vector>

namespace oracle {

inline std::vector<std::string> reference_fuse(std::vector<std::string> pri,
                                               const std::vector<std::string>& sec, int alpha, int eta) {
    auto rank = [&](const std::string& obj) {
        for (std::size_t p = 0; p < sec.size(); ++p)
            if (sec[p] == obj) return static_cast<int>(p) + 1;
        return eta + 1;
    };
    int permutations = 1;
    int passes = 0;
    while (permutations == 1 && passes < eta * eta) {
        permutations = 0;
        ++passes;
        double i = 1;
        while (i < eta / 2.0) {
            int j = 1;
            while (j <= eta - i) {
                const auto ii = static_cast<std::size_t>(i);
                if (ii + j <= pri.size()) {
                    const int a = rank(pri[ii - 1]);
                    const int b = rank(pri[ii + j - 1]);
                    if (a > b + alpha + j) {
                        std::swap(pri[ii - 1], pri[ii + j - 1]);
                        permutations = 1;
                    }
                }
                ++j;
            }
            ++i;
        }
    }
    return pri;
}

inline facret::RankedList make_list(const std::vector<std::string>& objects, int eta) {
    facret::RankedList l;
    l.eta = eta;
    double score = 0.0;
    for (const auto& o : objects) l.entries.push_back({o, o + "_img", score += 0.1});
    return l;
}

/// Random top-η pair over a shared pool of objects; lists may be shorter
/// than η and only partially overlap.
inline std::pair<facret::RankedList, facret::RankedList> random_pair(facret::Rng& rng, int eta) {
    const int pool = eta + static_cast<int>(rng.below(static_cast<std::uint64_t>(eta) + 1));
    std::vector<std::string> objects;
    for (int i = 0; i < pool; ++i) objects.push_back("obj" + std::to_string(i));
    auto draw = [&] {
        auto copy = objects;
        for (int i = static_cast<int>(copy.size()) - 1; i > 0; --i)
            std::swap(copy[i], copy[rng.below(static_cast<std::uint64_t>(i + 1))]);
        const int len = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(eta)));
        copy.resize(static_cast<std::size_t>(len));
        return copy;
    };
    return {make_list(draw(), eta), make_list(draw(), eta)};
}

} // namespace oracle
