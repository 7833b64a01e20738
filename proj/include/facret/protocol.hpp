#pragma once

#include "facret/codec.hpp"
#include "facret/matcher.hpp"
#include "facret/ranked_list.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace facret {

inline constexpr std::uint8_t kProtocolVersion = 1;
inline constexpr std::uint32_t kDefaultMaxFrame = 1u << 20;

enum class Status : std::uint8_t {
    ok = 0,
    malformed_frame = 1,
    invalid_parameters = 2,
    processing_error = 3,
};

struct QueryMessage {
    std::uint8_t version = kProtocolVersion;
    std::uint16_t eta = 20;
    std::uint16_t alpha = 2;
    std::vector<std::uint8_t> pca_blob;
    std::vector<std::uint8_t> nmf_blob;
};

struct ResultEntry {
    std::string object_id;
    float score = 0.0f;
    std::uint16_t rank = 0;

    bool operator==(const ResultEntry&) const = default;
};

struct ResponseMessage {
    Status status = Status::ok;
    std::vector<ResultEntry> results;
    std::string error_text;

    bool operator==(const ResponseMessage&) const = default;
};

/// "QRY1", u8 version, u16 eta, u16 alpha, u32 + PCA blob, u32 + NMF blob.
std::vector<std::uint8_t> encode_query(const QueryMessage& q);
/// Throws FormatError on any structural problem (including trailing bytes).
QueryMessage decode_query(std::span<const std::uint8_t> payload);

/// "RSP1", u8 status, u16 count, count × (u16 + object id, f32 score,
/// u16 rank), u16 + error text.
std::vector<std::uint8_t> encode_response(const ResponseMessage& r);
ResponseMessage decode_response(std::span<const std::uint8_t> payload);

/// u32 little-endian length + payload.
std::vector<std::uint8_t> frame(std::span<const std::uint8_t> payload);

/// Server-side handling of one query payload: decode, validate, dequantize,
/// retrieve_combined, respond. Never throws; failures become a status.
ResponseMessage answer_query(const ObjectIndex& index, std::span<const std::uint8_t> payload);

/// The response that answer_query would give for an already-ranked list.
ResponseMessage response_from(const RankedList& list);

/// Back to a RankedList (image ids are not on the wire and stay empty).
RankedList ranked_list_from(const ResponseMessage& r, int eta);

} // namespace facret
