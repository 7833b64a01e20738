#pragma once

#include "facret/ranked_list.hpp"

namespace facret {

struct FusionParams {
    int alpha = 2;
    int eta = 20;
};

/// Reorders the primary (NMF) list using the secondary (PCA) list.
///
/// Each pass visits pairs (ℓ_i, ℓ_{i+j}) of the working primary list for
/// i = 1 while i < η/2 and j = 1..η−i (pairs beyond the list length are
/// skipped). With a, b the 1-based secondary ranks of the two objects
/// (η+1 when absent) the pair is swapped when a > b + α + j. Passes repeat
/// until one makes no swap, at most η² passes. Scores travel with objects.
///
/// Throws InvalidArgument when α ∉ [0, η] or either list exceeds η entries.
RankedList fuse(const RankedList& primary, const RankedList& secondary, const FusionParams& params);

} // namespace facret
