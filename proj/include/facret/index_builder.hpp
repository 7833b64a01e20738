#pragma once

#include "facret/codec.hpp"
#include "facret/descriptor_store.hpp"
#include "facret/factorization.hpp"
#include "facret/matcher.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace facret {

/// How one image is turned into its pair of loadings. The same options are
/// used on the client (query) side and the server (database) side.
struct ExtractionOptions {
    std::optional<int> k_max;      // default_k_max(T, N) when unset
    std::optional<int> fixed_k;    // bypass order estimation, clamped to min(T, N)
    NmfOptions nmf;
};

struct ImageFactors {
    std::string image_id;
    std::string object_id;
    int k_star = 0;
    FactorLoadings pca;
    FactorLoadings nmf;
};

/// estimate_order, then PCA and NMF at the same order.
ImageFactors extract_factors(const DescriptorMatrix& m, const ExtractionOptions& options = {});

/// Quantized pair as stored in an index file or sent in a query.
struct QuantizedPair {
    QuantizedLoadings pca;
    QuantizedLoadings nmf;
};

QuantizedPair quantize_pair(const ImageFactors& f, int bits);

struct IndexRecord {
    std::string image_id;
    std::string object_id;
    QuantizedPair loadings;
};

struct BuildOptions {
    ExtractionOptions extraction;
    int bits = 5;  // 0 stores full-precision loadings (in-memory only)
};

/// Factorizes every image, passes both loadings through quantize/dequantize
/// at `bits` and inserts them. Throws InvalidArgument on an empty corpus.
ObjectIndex build_index(std::span<const DescriptorMatrix> corpus, const BuildOptions& options = {});

/// Adds already-extracted factors, quantizing when bits > 0.
void add_to_index(ObjectIndex& index, const ImageFactors& f, int bits);

std::vector<IndexRecord> prepare_records(std::span<const DescriptorMatrix> corpus,
                                         const ExtractionOptions& options, int bits);

ObjectIndex index_from_records(std::span<const IndexRecord> records);

/// "IDX1", u32 count, then per record: u16+object id, u32+PCA blob,
/// u32+NMF blob (blobs in the codec layout; the image id lives in the blob).
std::vector<std::uint8_t> encode_index_file(std::span<const IndexRecord> records);
std::vector<IndexRecord> decode_index_file(std::span<const std::uint8_t> bytes);

void write_index_file(const std::filesystem::path& path, std::span<const IndexRecord> records);
std::vector<IndexRecord> read_index_file(const std::filesystem::path& path);

} // namespace facret
