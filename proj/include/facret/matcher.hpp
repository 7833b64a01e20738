#pragma once

#include "facret/factorization.hpp"
#include "facret/fusion.hpp"
#include "facret/ranked_list.hpp"

#include <Eigen/Dense>

#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace facret {

enum class Metric { angle, correlation };

const char* to_string(Metric metric);

/// Orthonormal basis of the column span. Throws DegenerateLoadings when the
/// span has lower dimension than the column count.
Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& columns);

/// Smallest principal angle between the column spans, in [0, π/2]; equal to
/// acos(‖P_A·P_B‖₂). Works on orthonormalized bases and switches to the
/// sine formulation for small angles, where acos loses half its digits.
double subspace_angle(const FactorLoadings& a, const FactorLoadings& b);

/// Same, on bases that are already orthonormal.
double principal_angle_of_bases(const Eigen::MatrixXd& qa, const Eigen::MatrixXd& qb);

/// Sum over the columns of S = AᵀB of each column's maximum.
double correlation_score(const FactorLoadings& a, const FactorLoadings& b);

struct IndexedImage {
    std::string image_id;
    std::string object_id;
    FactorLoadings pca;
    FactorLoadings nmf;
    int k_star = 0;
    // Orthonormal bases of the two spans, empty when the loadings are
    // degenerate (such images always score the worst possible angle).
    std::optional<Eigen::MatrixXd> pca_basis;
    std::optional<Eigen::MatrixXd> nmf_basis;
};

/// Server-side database of K images grouped into objects. Immutable once
/// built; safe to share across threads.
class ObjectIndex {
public:
    /// Throws InvalidArgument on duplicate image ids, mismatched kinds,
    /// differing orders between the two loadings, or a dimension that
    /// differs from the images already present.
    void add(std::string image_id, std::string object_id, FactorLoadings pca, FactorLoadings nmf);

    const std::vector<IndexedImage>& images() const { return images_; }
    const IndexedImage& image(const std::string& image_id) const;
    bool contains(const std::string& image_id) const { return by_id_.contains(image_id); }

    std::size_t image_count() const { return images_.size(); }
    std::size_t object_count() const;
    int dim() const { return dim_; }

    /// Image ids of every view of `object_id`.
    std::vector<std::string> images_of(const std::string& object_id) const;

private:
    std::vector<IndexedImage> images_;
    std::unordered_map<std::string, std::size_t> by_id_;
    std::unordered_map<std::string, std::vector<std::string>> by_object_;
    int dim_ = 0;
};

/// Scores `query` against the loadings of the same kind for every image
/// (or only `candidates`), sorts best first with ties broken by image id,
/// keeps each object's best image and truncates to `eta` objects.
RankedList rank_database(const FactorLoadings& query, const ObjectIndex& index, Metric metric,
                         int eta, const std::set<std::string>* candidates = nullptr);

/// PCA correlation ranking gives the secondary list; NMF angle ranking over
/// every view of the secondary list's objects gives the primary list; the
/// result is fuse(primary, secondary, alpha).
RankedList retrieve_combined(const FactorLoadings& query_pca, const FactorLoadings& query_nmf,
                             const ObjectIndex& index, int eta, int alpha);

/// Both hypotheses and the fused list, for evaluation.
struct CombinedResult {
    RankedList secondary;
    RankedList primary;
    RankedList fused;
};

CombinedResult retrieve_combined_detail(const FactorLoadings& query_pca,
                                        const FactorLoadings& query_nmf,
                                        const ObjectIndex& index, int eta, int alpha);

} // namespace facret
