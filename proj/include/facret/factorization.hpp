#pragma once

#include "facret/descriptor_store.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace facret {

enum class LoadingKind : std::uint8_t { pca = 0, nmf = 1 };

const char* to_string(LoadingKind kind);

/// T×k factor loading matrix: H for PCA, L for NMF. This is the compressed
/// representation of one image.
struct FactorLoadings {
    std::string image_id;
    LoadingKind kind = LoadingKind::pca;
    Eigen::MatrixXd columns;

    int dim() const { return static_cast<int>(columns.rows()); }
    int order() const { return static_cast<int>(columns.cols()); }
};

/// Throws InvalidArgument unless every column is unit norm within `tol`,
/// NMF loadings are non-negative and, when `require_orthonormal`, PCA
/// loadings have an identity Gram matrix within `tol`. Dequantized PCA
/// loadings are only approximately orthogonal, hence the flag.
void check_loadings(const FactorLoadings& f, bool require_orthonormal = true, double tol = 1e-8);

/// The 1-sparse column structure of R: descriptor j belongs to exactly one
/// cluster and carries a non-negative scale. Cluster indices are 0-based.
struct FactorAssignment {
    int k = 0;
    std::vector<int> cluster_of;
    std::vector<double> scale_of;

    int count() const { return static_cast<int>(cluster_of.size()); }

    /// Dense k×N matrix R.
    Eigen::MatrixXd to_matrix() const;
};

struct SvdResult {
    Eigen::MatrixXd u;                  // T×T
    Eigen::VectorXd singular_values;    // length min(T, N), non-increasing
    Eigen::MatrixXd vt;                 // min(T, N)×N
};

SvdResult compute_svd(const Eigen::MatrixXd& m);

struct PcaResult {
    FactorLoadings loadings;
    SvdResult svd;
};

/// First k left singular vectors, each flipped so its largest-magnitude
/// entry (first one on ties) is positive.
PcaResult pca_loadings(const DescriptorMatrix& m, int k);

/// Same as above from an already computed decomposition.
FactorLoadings pca_loadings_from_svd(const SvdResult& svd, int k, std::string image_id = {});

struct NmfOptions {
    int max_iters = 100;
    double tol = 1e-6;
    std::uint64_t seed = 0;
};

struct NmfResult {
    FactorLoadings loadings;
    FactorAssignment assignment;
    std::vector<double> objective_trace;
};

/// Sparse NMF M ≈ L·R with unit-norm non-negative columns of L and exactly
/// one non-zero per column of R, by alternating minimization:
///   assign: each descriptor goes to the column with the largest inner
///           product, with that inner product as its scale;
///   update: each column becomes the normalized sum of its descriptors;
///           a column whose update would lower the energy it captures keeps
///           its previous value, and empty clusters are re-seeded from the
///           descriptor with the largest residual.
/// Initial columns are k distinct descriptors picked farthest-point first,
/// starting from a seed-chosen descriptor.
NmfResult nmf_loadings(const DescriptorMatrix& m, int k, const NmfOptions& options = {});

/// ½‖M − L·R‖²_F with R rebuilt from `assign`.
double nmf_objective(const DescriptorMatrix& m, const FactorLoadings& loadings,
                     const FactorAssignment& assign);

} // namespace facret
