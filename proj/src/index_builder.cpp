#include "facret/index_builder.hpp"

#include "facret/byte_io.hpp"
#include "facret/errors.hpp"
#include "facret/model_order.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

namespace facret {

namespace {

constexpr std::string_view kIndexMagic = "IDX1";

} // namespace

ImageFactors extract_factors(const DescriptorMatrix& m, const ExtractionOptions& options) {
    const Eigen::MatrixXd data = m.as_double();
    SvdResult svd = compute_svd(data);
    int k = 0;
    if (options.fixed_k) {
        if (*options.fixed_k < 1) {
            throw InvalidArgument("fixed order must be positive");
        }
        k = std::min(*options.fixed_k, std::min(m.dim(), m.count()));
    } else {
        const int k_max = options.k_max.value_or(default_k_max(m.dim(), m.count()));
        k = estimate_order(svd, m.dim(), m.count(), k_max).k_star;
    }
    ImageFactors f;
    f.image_id = m.image_id();
    f.object_id = m.object_id();
    f.k_star = k;
    f.pca = pca_loadings_from_svd(svd, k, m.image_id());
    f.nmf = nmf_loadings(m, k, options.nmf).loadings;
    return f;
}

QuantizedPair quantize_pair(const ImageFactors& f, int bits) {
    return QuantizedPair{quantize(f.pca, bits), quantize(f.nmf, bits)};
}

void add_to_index(ObjectIndex& index, const ImageFactors& f, int bits) {
    if (bits == 0) {
        index.add(f.image_id, f.object_id, f.pca, f.nmf);
        return;
    }
    const auto q = quantize_pair(f, bits);
    index.add(f.image_id, f.object_id, dequantize(q.pca), dequantize(q.nmf));
}

ObjectIndex build_index(std::span<const DescriptorMatrix> corpus, const BuildOptions& options) {
    if (corpus.empty()) {
        throw InvalidArgument("cannot build an index from an empty corpus");
    }
    ObjectIndex index;
    for (const auto& m : corpus) {
        add_to_index(index, extract_factors(m, options.extraction), options.bits);
    }
    return index;
}

std::vector<IndexRecord> prepare_records(std::span<const DescriptorMatrix> corpus,
                                         const ExtractionOptions& options, int bits) {
    if (corpus.empty()) {
        throw InvalidArgument("cannot build an index from an empty corpus");
    }
    std::vector<IndexRecord> records;
    records.reserve(corpus.size());
    for (const auto& m : corpus) {
        const auto f = extract_factors(m, options);
        records.push_back({f.image_id, f.object_id, quantize_pair(f, bits)});
    }
    return records;
}

ObjectIndex index_from_records(std::span<const IndexRecord> records) {
    ObjectIndex index;
    for (const auto& r : records) {
        index.add(r.image_id, r.object_id, dequantize(r.loadings.pca), dequantize(r.loadings.nmf));
    }
    return index;
}

std::vector<std::uint8_t> encode_index_file(std::span<const IndexRecord> records) {
    ByteWriter out;
    out.text(kIndexMagic);
    out.u32(static_cast<std::uint32_t>(records.size()));
    for (const auto& r : records) {
        out.short_string(r.object_id);
        for (const auto* q : {&r.loadings.pca, &r.loadings.nmf}) {
            const auto blob = encode(*q);
            out.u32(static_cast<std::uint32_t>(blob.size()));
            out.bytes(blob);
        }
    }
    return out.take();
}

std::vector<IndexRecord> decode_index_file(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes);
    in.expect_magic(kIndexMagic);
    const std::uint32_t count = in.u32();
    std::vector<IndexRecord> records;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string object_id = in.short_string();
        auto pca = decode(in.bytes(in.u32()));
        auto nmf = decode(in.bytes(in.u32()));
        if (pca.kind() != LoadingKind::pca || nmf.kind() != LoadingKind::nmf ||
            pca.image_id() != nmf.image_id()) {
            throw FormatError("index record " + std::to_string(i) + " has inconsistent blobs");
        }
        std::string image_id = pca.image_id();
        records.push_back({std::move(image_id), std::move(object_id), {std::move(pca), std::move(nmf)}});
    }
    if (in.remaining() != 0) {
        throw FormatError("trailing bytes after index records");
    }
    return records;
}

void write_index_file(const std::filesystem::path& path, std::span<const IndexRecord> records) {
    const auto bytes = encode_index_file(records);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<IndexRecord> read_index_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_index_file(bytes);
}

} // namespace facret
