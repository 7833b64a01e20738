#pragma once

#include "facret/factorization.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace facret {

/// Fixed-rate uniform scalar quantization of a loading matrix. The range is
/// fixed per kind ([−1, 1] for PCA, [0, 1] for NMF) so no side information
/// beyond the bit depth is needed.
class QuantizedLoadings {
public:
    /// Validates shape, bit depth, kind range and that every level < 2^bits.
    QuantizedLoadings(std::string image_id, LoadingKind kind, int dim, int order, int bits,
                      std::vector<std::uint16_t> levels);

    const std::string& image_id() const { return image_id_; }
    LoadingKind kind() const { return kind_; }
    int dim() const { return dim_; }
    int order() const { return order_; }
    int bits() const { return bits_; }
    double lo() const { return lo_; }
    double hi() const { return hi_; }
    double step() const { return (hi_ - lo_) / static_cast<double>(max_level()); }
    std::uint32_t max_level() const { return (1u << bits_) - 1u; }

    /// Column-major, one entry per matrix element.
    const std::vector<std::uint16_t>& levels() const { return levels_; }

    bool operator==(const QuantizedLoadings& other) const = default;

private:
    std::string image_id_;
    LoadingKind kind_;
    int dim_;
    int order_;
    int bits_;
    double lo_;
    double hi_;
    std::vector<std::uint16_t> levels_;
};

inline constexpr int kMinBits = 1;
inline constexpr int kMaxBits = 16;

/// level = round((x − lo)/Δ), half away from zero, Δ = (hi − lo)/(2^b − 1).
/// Entries may exceed the range by at most 1e-9 and are clamped.
QuantizedLoadings quantize(const FactorLoadings& f, int bits);

enum class Renormalize { yes, no };

/// x̂ = lo + level·Δ. With Renormalize::yes (the default) every non-zero
/// column is rescaled to unit norm; all-zero columns stay zero and are left
/// for downstream metrics to reject.
FactorLoadings dequantize(const QuantizedLoadings& q, Renormalize renormalize = Renormalize::yes);

/// Body size ⌈T·k·b/8⌉ in bytes.
std::size_t packed_size(int dim, int order, int bits);

/// Header size for a blob carrying `image_id`.
std::size_t blob_header_size(const std::string& image_id);

/// "QFL1", u8 kind, u8 bits, u16 T, u16 k, f32 lo, f32 hi, u16 id length,
/// id bytes, then the levels packed column-major with little-endian bit
/// order inside each byte.
std::vector<std::uint8_t> encode(const QuantizedLoadings& q);

QuantizedLoadings decode(std::span<const std::uint8_t> bytes);

} // namespace facret
