#include "facret/codec.hpp"

#include "facret/byte_io.hpp"
#include "facret/errors.hpp"

#include <algorithm>
#include <cmath>

namespace facret {

namespace {

constexpr std::string_view kBlobMagic = "QFL1";
constexpr double kRangeSlack = 1e-9;

struct Range {
    double lo;
    double hi;
};

Range range_of(LoadingKind kind) {
    return kind == LoadingKind::pca ? Range{-1.0, 1.0} : Range{0.0, 1.0};
}

void check_bits(int bits) {
    if (bits < kMinBits || bits > kMaxBits) {
        throw InvalidArgument("bit depth " + std::to_string(bits) + " outside [1, 16]");
    }
}

} // namespace

QuantizedLoadings::QuantizedLoadings(std::string image_id, LoadingKind kind, int dim, int order,
                                     int bits, std::vector<std::uint16_t> levels)
    : image_id_(std::move(image_id)),
      kind_(kind),
      dim_(dim),
      order_(order),
      bits_(bits),
      lo_(range_of(kind).lo),
      hi_(range_of(kind).hi),
      levels_(std::move(levels)) {
    check_bits(bits_);
    if (kind_ != LoadingKind::pca && kind_ != LoadingKind::nmf) {
        throw InvalidArgument("unknown loading kind");
    }
    if (dim_ < 1 || order_ < 1 || dim_ > 0xFFFF || order_ > 0xFFFF) {
        throw InvalidArgument("quantized loadings need 1 <= T, k <= 65535");
    }
    if (levels_.size() != static_cast<std::size_t>(dim_) * static_cast<std::size_t>(order_)) {
        throw InvalidArgument("level count does not match T*k");
    }
    for (auto level : levels_) {
        if (level > max_level()) {
            throw InvalidArgument("quantization level exceeds 2^bits - 1");
        }
    }
}

QuantizedLoadings quantize(const FactorLoadings& f, int bits) {
    check_bits(bits);
    const auto [lo, hi] = range_of(f.kind);
    const double max_level = static_cast<double>((1u << bits) - 1u);
    const double step = (hi - lo) / max_level;
    std::vector<std::uint16_t> levels;
    levels.reserve(static_cast<std::size_t>(f.columns.size()));
    for (Eigen::Index c = 0; c < f.columns.cols(); ++c) {
        for (Eigen::Index r = 0; r < f.columns.rows(); ++r) {
            double x = f.columns(r, c);
            if (!(x >= lo - kRangeSlack && x <= hi + kRangeSlack)) {
                throw InvalidArgument("loading entry " + std::to_string(x) + " outside [" +
                                      std::to_string(lo) + ", " + std::to_string(hi) + "]");
            }
            x = std::clamp(x, lo, hi);
            const double level = std::round((x - lo) / step);
            levels.push_back(static_cast<std::uint16_t>(std::clamp(level, 0.0, max_level)));
        }
    }
    return QuantizedLoadings(f.image_id, f.kind, f.dim(), f.order(), bits, std::move(levels));
}

FactorLoadings dequantize(const QuantizedLoadings& q, Renormalize renormalize) {
    Eigen::MatrixXd cols(q.dim(), q.order());
    const double step = q.step();
    std::size_t i = 0;
    for (int c = 0; c < q.order(); ++c) {
        for (int r = 0; r < q.dim(); ++r) {
            cols(r, c) = q.lo() + q.levels()[i++] * step;
        }
        if (renormalize == Renormalize::yes) {
            const double norm = cols.col(c).norm();
            if (norm > 0.0) {
                cols.col(c) /= norm;
            }
        }
    }
    return FactorLoadings{q.image_id(), q.kind(), std::move(cols)};
}

std::size_t packed_size(int dim, int order, int bits) {
    const auto total_bits = static_cast<std::size_t>(dim) * static_cast<std::size_t>(order) *
                            static_cast<std::size_t>(bits);
    return (total_bits + 7) / 8;
}

std::size_t blob_header_size(const std::string& image_id) {
    return 4 + 1 + 1 + 2 + 2 + 4 + 4 + 2 + image_id.size();
}

std::vector<std::uint8_t> encode(const QuantizedLoadings& q) {
    ByteWriter out;
    out.text(kBlobMagic);
    out.u8(static_cast<std::uint8_t>(q.kind()));
    out.u8(static_cast<std::uint8_t>(q.bits()));
    out.u16(static_cast<std::uint16_t>(q.dim()));
    out.u16(static_cast<std::uint16_t>(q.order()));
    out.f32(static_cast<float>(q.lo()));
    out.f32(static_cast<float>(q.hi()));
    out.short_string(q.image_id());

    auto& buf = out.buffer();
    const std::size_t body = buf.size();
    buf.resize(body + packed_size(q.dim(), q.order(), q.bits()), 0);
    std::size_t bit = 0;
    for (auto level : q.levels()) {
        for (int b = 0; b < q.bits(); ++b, ++bit) {
            if ((level >> b) & 1u) {
                buf[body + bit / 8] |= static_cast<std::uint8_t>(1u << (bit % 8));
            }
        }
    }
    return out.take();
}

QuantizedLoadings decode(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes);
    in.expect_magic(kBlobMagic);
    const std::uint8_t kind_byte = in.u8();
    if (kind_byte > 1) {
        throw FormatError("unknown loading kind " + std::to_string(kind_byte));
    }
    const auto kind = static_cast<LoadingKind>(kind_byte);
    const int bits = in.u8();
    if (bits < kMinBits || bits > kMaxBits) {
        throw FormatError("bit depth " + std::to_string(bits) + " outside [1, 16]");
    }
    const int dim = in.u16();
    const int order = in.u16();
    const float lo = in.f32();
    const float hi = in.f32();
    const auto expected = range_of(kind);
    if (lo != static_cast<float>(expected.lo) || hi != static_cast<float>(expected.hi)) {
        throw FormatError("quantizer range does not match loading kind");
    }
    std::string image_id = in.short_string();
    if (dim < 1 || order < 1) {
        throw FormatError("empty loading matrix");
    }
    const auto packed = in.bytes(packed_size(dim, order, bits));
    if (in.remaining() != 0) {
        throw FormatError("trailing bytes after quantized loadings");
    }
    std::vector<std::uint16_t> levels(static_cast<std::size_t>(dim) * static_cast<std::size_t>(order));
    std::size_t bit = 0;
    for (auto& level : levels) {
        std::uint32_t v = 0;
        for (int b = 0; b < bits; ++b, ++bit) {
            v |= static_cast<std::uint32_t>((packed[bit / 8] >> (bit % 8)) & 1u) << b;
        }
        level = static_cast<std::uint16_t>(v);
    }
    return QuantizedLoadings(std::move(image_id), kind, dim, order, bits, std::move(levels));
}

} // namespace facret
