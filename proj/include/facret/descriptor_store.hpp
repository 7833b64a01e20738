#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace facret {

/// T×N matrix of keypoint descriptors for one image, one descriptor per
/// column. Entries are float32 because that is the precision of the on-disk
/// format; numerical code promotes to double via `as_double()`.
///
/// Invariants (checked on construction): T ≥ 2, N ≥ 1, all entries finite
/// and non-negative, no all-zero column.
class DescriptorMatrix {
public:
    DescriptorMatrix(Eigen::MatrixXf values, std::string image_id = {},
                     std::string object_id = {});

    int dim() const { return static_cast<int>(values_.rows()); }
    int count() const { return static_cast<int>(values_.cols()); }

    const Eigen::MatrixXf& values() const { return values_; }
    Eigen::MatrixXd as_double() const { return values_.cast<double>(); }

    const std::string& image_id() const { return image_id_; }
    const std::string& object_id() const { return object_id_; }

    bool operator==(const DescriptorMatrix& other) const = default;

private:
    Eigen::MatrixXf values_;
    std::string image_id_;
    std::string object_id_;
};

enum class DescriptorFormat { binary, csv };

/// Parses a descriptor file. Binary files are "DMT1", u32 T, u32 N, T·N
/// little-endian float32 in column-major order, then an optional
/// "\nID:<image>;OBJ:<object>\n" trailer. CSV files hold one row per
/// descriptor dimension.
DescriptorMatrix load_descriptors(std::span<const std::uint8_t> bytes, DescriptorFormat format);

std::vector<std::uint8_t> save_descriptors(const DescriptorMatrix& m, DescriptorFormat format);

DescriptorMatrix read_descriptor_file(const std::filesystem::path& path);
void write_descriptor_file(const std::filesystem::path& path, const DescriptorMatrix& m);

/// Loads every `*.dmt` (binary) and `*.csv` file in `dir`, sorted by file
/// name. Files without an ID trailer take the file stem as image id and the
/// stem's prefix up to the first '_' as object id.
std::vector<DescriptorMatrix> load_corpus_dir(const std::filesystem::path& dir);

struct SynthCorpusSpec {
    int num_objects = 1;
    int views_per_object = 1;
    int dim = 32;
    int descriptors_per_view = 100;
    int planted_rank = 2;
    double view_noise_sigma = 0.0;
    std::uint64_t seed = 0;
    bool identical_views = false;  // every view repeats the first one
    double view_skew = 0.0;        // per-view imbalance of centroid prevalence
    int shared_centroids = 0;      // leading centroids common to every object
};

/// Parses "objects=50,views=5,T=32,N=400,r=4,sigma=0.05,seed=1" (plus
/// "identical=1", "skew=1.5", "shared=2"); omitted keys keep the defaults above.
SynthCorpusSpec parse_synth_spec(const std::string& text);

/// Synthetic stand-in for a real descriptor corpus. Each object gets
/// `planted_rank` non-negative unit-norm centroids; each descriptor of each
/// view is a non-negative, mostly single-centroid mixture of them with a
/// random scale, plus Gaussian noise truncated at zero. With a positive
/// skew each view favours some centroids over others, so views of one
/// object share a span but not a mean direction. Views of the same
/// object share centroids; objects draw independent centroids apart from
/// `shared_centroids` that every object has in common.
///
/// Image ids are "o<obj>_v<view>" and object ids "o<obj>", both zero-padded
/// and 0-based. Output order: object-major, then view.
std::vector<DescriptorMatrix> generate_corpus(const SynthCorpusSpec& spec);

} // namespace facret
