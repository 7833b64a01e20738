#include "facret/factorization.hpp"

#include "facret/errors.hpp"
#include "facret/rng.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

namespace facret {

const char* to_string(LoadingKind kind) {
    return kind == LoadingKind::pca ? "pca" : "nmf";
}

void check_loadings(const FactorLoadings& f, bool require_orthonormal, double tol) {
    if (f.order() < 1 || f.dim() < 1) {
        throw InvalidArgument("loadings must have at least one column");
    }
    if (!f.columns.allFinite()) {
        throw InvalidArgument("loadings contain non-finite entries");
    }
    for (int c = 0; c < f.order(); ++c) {
        if (std::abs(f.columns.col(c).norm() - 1.0) > tol) {
            throw InvalidArgument("loading column " + std::to_string(c) + " is not unit norm");
        }
    }
    if (f.kind == LoadingKind::nmf && f.columns.minCoeff() < 0.0) {
        throw InvalidArgument("NMF loadings must be non-negative");
    }
    if (f.kind == LoadingKind::pca && require_orthonormal) {
        const Eigen::MatrixXd gram = f.columns.transpose() * f.columns;
        const auto k = gram.rows();
        if ((gram - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff() > tol) {
            throw InvalidArgument("PCA loadings are not orthonormal");
        }
    }
}

Eigen::MatrixXd FactorAssignment::to_matrix() const {
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(k, count());
    for (int j = 0; j < count(); ++j) {
        r(cluster_of[j], j) = scale_of[j];
    }
    return r;
}

SvdResult compute_svd(const Eigen::MatrixXd& m) {
    if (!m.allFinite()) {
        throw InvalidArgument("SVD input contains non-finite entries");
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) {
        throw Error("SVD failed to converge");
    }
    return SvdResult{svd.matrixU(), svd.singularValues(), svd.matrixV().transpose()};
}

FactorLoadings pca_loadings_from_svd(const SvdResult& svd, int k, std::string image_id) {
    const auto available = std::min<Eigen::Index>(svd.u.cols(), svd.singular_values.size());
    if (k < 1 || k > available) {
        throw InvalidArgument("PCA order " + std::to_string(k) + " outside [1, " +
                              std::to_string(available) + "]");
    }
    Eigen::MatrixXd h = svd.u.leftCols(k);
    for (int c = 0; c < k; ++c) {
        Eigen::Index arg = 0;
        double best = -1.0;
        for (Eigen::Index r = 0; r < h.rows(); ++r) {
            if (std::abs(h(r, c)) > best) {
                best = std::abs(h(r, c));
                arg = r;
            }
        }
        if (h(arg, c) < 0.0) {
            h.col(c) = -h.col(c);
        }
    }
    return FactorLoadings{std::move(image_id), LoadingKind::pca, std::move(h)};
}

PcaResult pca_loadings(const DescriptorMatrix& m, int k) {
    if (k < 1 || k > std::min(m.dim(), m.count())) {
        throw InvalidArgument("PCA order " + std::to_string(k) + " outside [1, min(T, N)]");
    }
    auto svd = compute_svd(m.as_double());
    auto loadings = pca_loadings_from_svd(svd, k, m.image_id());
    return PcaResult{std::move(loadings), std::move(svd)};
}

namespace {

struct Assignment {
    std::vector<int> cluster;
    std::vector<double> scale;
};

// Best column per descriptor; ties go to the lower column index.
Assignment assign(const Eigen::MatrixXd& data, const Eigen::MatrixXd& loadings) {
    const Eigen::MatrixXd sim = loadings.transpose() * data;  // k×N
    Assignment out;
    out.cluster.resize(static_cast<std::size_t>(data.cols()));
    out.scale.resize(static_cast<std::size_t>(data.cols()));
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < sim.rows(); ++c) {
            if (sim(c, j) > sim(best, j)) {
                best = c;
            }
        }
        out.cluster[j] = static_cast<int>(best);
        out.scale[j] = std::max(0.0, sim(best, j));
    }
    return out;
}

// Per-descriptor squared residual ‖d_j − r_j·L_c‖².
Eigen::VectorXd residuals(const Eigen::MatrixXd& data, const Eigen::MatrixXd& loadings,
                          const Assignment& a) {
    Eigen::VectorXd res(data.cols());
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
        res(j) = (data.col(j) - a.scale[j] * loadings.col(a.cluster[j])).squaredNorm();
    }
    return res;
}

double half_sum(const Eigen::VectorXd& res) {
    double total = 0.0;
    for (Eigen::Index j = 0; j < res.size(); ++j) {
        total += res(j);
    }
    return 0.5 * total;
}

Eigen::MatrixXd farthest_point_init(const Eigen::MatrixXd& unit_data, int k, std::uint64_t seed) {
    const auto n = unit_data.cols();
    Rng rng(seed);
    std::vector<Eigen::Index> chosen;
    std::vector<bool> taken(static_cast<std::size_t>(n), false);
    chosen.push_back(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
    taken[chosen.back()] = true;

    // closest[j] = max cosine to any chosen descriptor.
    Eigen::VectorXd closest = unit_data.transpose() * unit_data.col(chosen.back());
    while (static_cast<int>(chosen.size()) < k) {
        Eigen::Index next = -1;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!taken[j] && (next < 0 || closest(j) < closest(next))) {
                next = j;
            }
        }
        chosen.push_back(next);
        taken[next] = true;
        closest = closest.cwiseMax(unit_data.transpose() * unit_data.col(next));
    }

    Eigen::MatrixXd init(unit_data.rows(), k);
    for (int c = 0; c < k; ++c) {
        init.col(c) = unit_data.col(chosen[c]);
    }
    return init;
}

} // namespace

NmfResult nmf_loadings(const DescriptorMatrix& m, int k, const NmfOptions& options) {
    if (k < 1 || k > m.count()) {
        throw InvalidArgument("NMF order " + std::to_string(k) + " outside [1, N]");
    }
    if (options.max_iters < 1 || !(options.tol > 0.0)) {
        throw InvalidArgument("NMF needs max_iters >= 1 and tol > 0");
    }
    const Eigen::MatrixXd data = m.as_double();
    if (data.minCoeff() < 0.0) {
        throw InvalidArgument("NMF input must be non-negative");
    }
    const auto n = data.cols();
    Eigen::MatrixXd unit_data = data;
    for (Eigen::Index j = 0; j < n; ++j) {
        unit_data.col(j).normalize();
    }

    Eigen::MatrixXd loadings = farthest_point_init(unit_data, k, options.seed);
    Assignment current = assign(data, loadings);
    Eigen::VectorXd res = residuals(data, loadings, current);
    std::vector<double> trace{half_sum(res)};

    for (int iter = 1; iter < options.max_iters; ++iter) {
        Eigen::MatrixXd candidate = loadings;
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(data.rows(), k);
        std::vector<int> members(static_cast<std::size_t>(k), 0);
        for (Eigen::Index j = 0; j < n; ++j) {
            sums.col(current.cluster[j]) += data.col(j);
            ++members[current.cluster[j]];
        }

        // Captured energy Σ (d_jᵀ L_c)² of each cluster under the old and the
        // proposed column; the proposal is kept only if it does not lose energy.
        Eigen::VectorXd old_energy = Eigen::VectorXd::Zero(k);
        Eigen::VectorXd new_energy = Eigen::VectorXd::Zero(k);
        for (int c = 0; c < k; ++c) {
            if (members[c] > 0) {
                candidate.col(c) = sums.col(c) / sums.col(c).norm();
            }
        }
        for (Eigen::Index j = 0; j < n; ++j) {
            const int c = current.cluster[j];
            const double before = std::max(0.0, data.col(j).dot(loadings.col(c)));
            const double after = std::max(0.0, data.col(j).dot(candidate.col(c)));
            old_energy(c) += before * before;
            new_energy(c) += after * after;
        }
        for (int c = 0; c < k; ++c) {
            if (members[c] > 0 && new_energy(c) < old_energy(c)) {
                candidate.col(c) = loadings.col(c);
            }
        }

        // Re-seed empty clusters from the worst-fit descriptors.
        Eigen::VectorXd worst = res;
        for (int c = 0; c < k; ++c) {
            if (members[c] == 0) {
                Eigen::Index arg = 0;
                worst.maxCoeff(&arg);
                candidate.col(c) = unit_data.col(arg);
                worst(arg) = -1.0;
            }
        }

        Assignment next = assign(data, candidate);
        Eigen::VectorXd next_res = residuals(data, candidate, next);
        const double objective = half_sum(next_res);
        const double previous = trace.back();
        if (objective > previous) {
            // Only reachable through rounding; treat as converged.
            break;
        }
        loadings = std::move(candidate);
        current = std::move(next);
        res = std::move(next_res);
        trace.push_back(objective);
        if (previous <= 0.0 || (previous - objective) / previous < options.tol) {
            break;
        }
    }

    FactorAssignment fa{k, std::move(current.cluster), std::move(current.scale)};
    return NmfResult{FactorLoadings{m.image_id(), LoadingKind::nmf, std::move(loadings)},
                     std::move(fa), std::move(trace)};
}

double nmf_objective(const DescriptorMatrix& m, const FactorLoadings& loadings,
                     const FactorAssignment& assign) {
    if (loadings.dim() != m.dim() || assign.count() != m.count() || assign.k != loadings.order() ||
        assign.scale_of.size() != assign.cluster_of.size()) {
        throw InvalidArgument("shape mismatch between descriptors, loadings and assignment");
    }
    for (int c : assign.cluster_of) {
        if (c < 0 || c >= assign.k) {
            throw InvalidArgument("cluster index out of range");
        }
    }
    const Eigen::MatrixXd residual = m.as_double() - loadings.columns * assign.to_matrix();
    return 0.5 * residual.squaredNorm();
}

} // namespace facret
