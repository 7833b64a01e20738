#include "facret/matcher.hpp"

#include "facret/errors.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_set>

namespace facret {

const char* to_string(Metric metric) {
    return metric == Metric::angle ? "angle" : "correlation";
}

Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& columns) {
    if (columns.cols() < 1 || columns.rows() < columns.cols()) {
        throw DegenerateLoadings("loadings need 1 <= k <= T columns");
    }
    if (!columns.allFinite()) {
        throw DegenerateLoadings("loadings contain non-finite entries");
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(columns);
    qr.setThreshold(1e-10);
    if (qr.rank() < columns.cols() || qr.maxPivot() == 0.0) {
        throw DegenerateLoadings("loadings are rank deficient (rank " + std::to_string(qr.rank()) +
                                 " < " + std::to_string(columns.cols()) + ")");
    }
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(columns.rows(), columns.cols());
    return q;
}

double principal_angle_of_bases(const Eigen::MatrixXd& qa, const Eigen::MatrixXd& qb) {
    // Project the lower-dimensional span onto the other so that the sines of
    // the principal angles are the singular values of the residual.
    const bool swap = qb.cols() > qa.cols();
    const Eigen::MatrixXd& big = swap ? qb : qa;
    const Eigen::MatrixXd& small = swap ? qa : qb;

    const Eigen::MatrixXd cosines = big.transpose() * small;
    Eigen::JacobiSVD<Eigen::MatrixXd> cos_svd(cosines);
    const double cos_max = cos_svd.singularValues()(0);

    double angle = 0.0;
    if (cos_max * cos_max < 0.5) {
        angle = std::acos(std::min(cos_max, 1.0));
    } else {
        const Eigen::MatrixXd residual = small - big * cosines;
        Eigen::JacobiSVD<Eigen::MatrixXd> sin_svd(residual);
        const auto& s = sin_svd.singularValues();
        const double sin_min = s(s.size() - 1);
        angle = std::asin(std::min(sin_min, 1.0));
    }
    return std::clamp(angle, 0.0, std::numbers::pi / 2.0);
}

double subspace_angle(const FactorLoadings& a, const FactorLoadings& b) {
    if (a.dim() != b.dim()) {
        throw InvalidArgument("subspace angle needs loadings of equal dimension");
    }
    return principal_angle_of_bases(orthonormal_basis(a.columns), orthonormal_basis(b.columns));
}

double correlation_score(const FactorLoadings& a, const FactorLoadings& b) {
    if (a.dim() != b.dim()) {
        throw InvalidArgument("correlation score needs loadings of equal dimension");
    }
    if (a.order() < 1 || b.order() < 1) {
        throw InvalidArgument("correlation score needs non-empty loadings");
    }
    const Eigen::MatrixXd s = a.columns.transpose() * b.columns;
    double total = 0.0;
    for (Eigen::Index l = 0; l < s.cols(); ++l) {
        total += s.col(l).maxCoeff();
    }
    return total;
}

namespace {

std::optional<Eigen::MatrixXd> try_basis(const Eigen::MatrixXd& columns) {
    try {
        return orthonormal_basis(columns);
    } catch (const DegenerateLoadings&) {
        return std::nullopt;
    }
}

} // namespace

void ObjectIndex::add(std::string image_id, std::string object_id, FactorLoadings pca, FactorLoadings nmf) {
    if (by_id_.contains(image_id)) {
        throw InvalidArgument("duplicate image id " + image_id);
    }
    if (pca.kind != LoadingKind::pca || nmf.kind != LoadingKind::nmf) {
        throw InvalidArgument("index entries need one PCA and one NMF loading matrix");
    }
    if (pca.order() != nmf.order() || pca.order() < 1) {
        throw InvalidArgument("PCA and NMF loadings of " + image_id + " differ in order");
    }
    if (pca.dim() != nmf.dim() || (dim_ != 0 && pca.dim() != dim_)) {
        throw InvalidArgument("loading dimension mismatch for " + image_id);
    }
    dim_ = pca.dim();

    IndexedImage img;
    img.image_id = image_id;
    img.object_id = object_id;
    img.k_star = pca.order();
    img.pca_basis = try_basis(pca.columns);
    img.nmf_basis = try_basis(nmf.columns);
    img.pca = std::move(pca);
    img.nmf = std::move(nmf);

    by_id_.emplace(image_id, images_.size());
    by_object_[object_id].push_back(image_id);
    images_.push_back(std::move(img));
}

const IndexedImage& ObjectIndex::image(const std::string& image_id) const {
    auto it = by_id_.find(image_id);
    if (it == by_id_.end()) {
        throw InvalidArgument("unknown image id " + image_id);
    }
    return images_[it->second];
}

std::size_t ObjectIndex::object_count() const { return by_object_.size(); }

std::vector<std::string> ObjectIndex::images_of(const std::string& object_id) const {
    auto it = by_object_.find(object_id);
    return it == by_object_.end() ? std::vector<std::string>{} : it->second;
}

RankedList rank_database(const FactorLoadings& query, const ObjectIndex& index, Metric metric,
                         int eta, const std::set<std::string>* candidates) {
    if (index.image_count() == 0) {
        throw InvalidArgument("cannot rank against an empty index");
    }
    if (eta < 1) {
        throw InvalidArgument("eta must be at least 1");
    }
    if (query.dim() != index.dim()) {
        throw InvalidArgument("query dimension differs from index dimension");
    }
    const bool use_pca = query.kind == LoadingKind::pca;

    Eigen::MatrixXd query_basis;
    if (metric == Metric::angle) {
        query_basis = orthonormal_basis(query.columns);
    }

    struct Scored {
        const IndexedImage* image;
        double score;
    };
    std::vector<Scored> scored;
    scored.reserve(index.image_count());
    for (const auto& img : index.images()) {
        if (candidates != nullptr && !candidates->contains(img.image_id)) {
            continue;
        }
        double score = 0.0;
        if (metric == Metric::angle) {
            const auto& basis = use_pca ? img.pca_basis : img.nmf_basis;
            score = basis ? principal_angle_of_bases(query_basis, *basis) : std::numbers::pi / 2.0;
        } else {
            score = correlation_score(query, use_pca ? img.pca : img.nmf);
        }
        scored.push_back({&img, score});
    }

    const bool ascending = metric == Metric::angle;
    std::sort(scored.begin(), scored.end(), [ascending](const Scored& x, const Scored& y) {
        if (x.score != y.score) {
            return ascending ? x.score < y.score : x.score > y.score;
        }
        return x.image->image_id < y.image->image_id;
    });

    RankedList out;
    out.eta = eta;
    std::unordered_set<std::string> seen;
    for (const auto& s : scored) {
        if (static_cast<int>(out.entries.size()) == eta) {
            break;
        }
        if (seen.insert(s.image->object_id).second) {
            out.entries.push_back({s.image->object_id, s.image->image_id, s.score});
        }
    }
    return out;
}

CombinedResult retrieve_combined_detail(const FactorLoadings& query_pca,
                                        const FactorLoadings& query_nmf,
                                        const ObjectIndex& index, int eta, int alpha) {
    if (alpha < 0 || alpha > eta) {
        throw InvalidArgument("alpha " + std::to_string(alpha) + " outside [0, eta]");
    }
    if (query_pca.kind != LoadingKind::pca || query_nmf.kind != LoadingKind::nmf) {
        throw InvalidArgument("combined retrieval needs PCA and NMF query loadings");
    }
    CombinedResult r;
    r.secondary = rank_database(query_pca, index, Metric::correlation, eta);
    std::set<std::string> candidates;
    for (const auto& e : r.secondary.entries) {
        for (auto& id : index.images_of(e.object_id)) {
            candidates.insert(std::move(id));
        }
    }
    r.primary = rank_database(query_nmf, index, Metric::angle, eta, &candidates);
    r.fused = fuse(r.primary, r.secondary, FusionParams{alpha, eta});
    return r;
}

RankedList retrieve_combined(const FactorLoadings& query_pca, const FactorLoadings& query_nmf,
                             const ObjectIndex& index, int eta, int alpha) {
    return retrieve_combined_detail(query_pca, query_nmf, index, eta, alpha).fused;
}

} // namespace facret
