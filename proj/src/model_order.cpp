#include "facret/model_order.hpp"

#include "facret/errors.hpp"

#include <algorithm>
#include <cmath>

namespace facret {

double residual_variance(const SvdResult& svd, int dim, int count, int k) {
    const int full = std::min(dim, count);
    if (k < 0 || k > full) {
        throw InvalidArgument("order " + std::to_string(k) + " outside [0, min(T, N)]");
    }
    const auto& s = svd.singular_values;
    double tail = 0.0;
    // Sum smallest first.
    for (auto i = s.size() - 1; i >= k; --i) {
        tail += s(i) * s(i);
    }
    const double v = tail / (static_cast<double>(dim) * static_cast<double>(count));
    return std::max(v, kResidualFloor);
}

double information_content(double residual, int k, int dim, int count) {
    const double t = dim;
    const double n = count;
    const double penalty = (t + n) / (t * n) * std::log((t * n) / (t + n));
    return std::log(residual) + k * penalty;
}

int default_k_max(int dim, int count) {
    return std::max(1, std::min(64, std::min(dim, count) / 2));
}

ModelOrderProfile estimate_order(const SvdResult& svd, int dim, int count, int k_max) {
    if (k_max < 1 || k_max > std::min(dim, count)) {
        throw InvalidArgument("k_max " + std::to_string(k_max) + " outside [1, min(T, N)]");
    }
    ModelOrderProfile profile;
    profile.k_max = k_max;
    profile.residual.reserve(static_cast<std::size_t>(k_max));
    profile.information.reserve(static_cast<std::size_t>(k_max));
    for (int k = 1; k <= k_max; ++k) {
        const double v = residual_variance(svd, dim, count, k);
        profile.residual.push_back(v);
        profile.information.push_back(information_content(v, k, dim, count));
    }
    const auto best = std::min_element(profile.information.begin(), profile.information.end());
    profile.k_star = static_cast<int>(best - profile.information.begin()) + 1;
    return profile;
}

ModelOrderProfile estimate_order(const DescriptorMatrix& m, std::optional<int> k_max) {
    const int limit = k_max.value_or(default_k_max(m.dim(), m.count()));
    if (limit < 1 || limit > std::min(m.dim(), m.count())) {
        throw InvalidArgument("k_max " + std::to_string(limit) + " outside [1, min(T, N)]");
    }
    return estimate_order(compute_svd(m.as_double()), m.dim(), m.count(), limit);
}

} // namespace facret
