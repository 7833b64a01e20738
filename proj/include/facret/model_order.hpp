#pragma once

#include "facret/descriptor_store.hpp"
#include "facret/factorization.hpp"

#include <optional>
#include <vector>

namespace facret {

/// Floor applied to the residual variance so its logarithm stays finite for
/// exactly low-rank inputs.
inline constexpr double kResidualFloor = 1e-12;

struct ModelOrderProfile {
    int k_max = 0;
    std::vector<double> residual;     // V(k) for k = 1..k_max, index k-1
    std::vector<double> information;  // I(k) for k = 1..k_max, index k-1
    int k_star = 0;
};

/// Mean squared residual (1/TN)·Σ_{i>k} σ_i² of the best rank-k model,
/// floored at kResidualFloor. Valid for 0 ≤ k ≤ min(T, N).
double residual_variance(const SvdResult& svd, int dim, int count, int k);

/// I(k) = ln V + k·((T+N)/(TN))·ln(TN/(T+N)).
double information_content(double residual, int k, int dim, int count);

/// min(64, ⌊min(T, N)/2⌋), at least 1. Keeps k_max away from the tail
/// where V(k) collapses towards zero faster than the penalty grows.
int default_k_max(int dim, int count);

ModelOrderProfile estimate_order(const SvdResult& svd, int dim, int count, int k_max);

/// One SVD, then the full I(k) profile; k_star is the smallest minimizer.
ModelOrderProfile estimate_order(const DescriptorMatrix& m, std::optional<int> k_max = std::nullopt);

} // namespace facret
