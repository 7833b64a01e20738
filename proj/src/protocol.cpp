#include "facret/protocol.hpp"

#include "facret/byte_io.hpp"
#include "facret/errors.hpp"

#include <limits>
#include <optional>

namespace facret {

namespace {

constexpr std::string_view kQueryMagic = "QRY1";
constexpr std::string_view kResponseMagic = "RSP1";

void write_blob(ByteWriter& w, const std::vector<std::uint8_t>& blob) {
    if (blob.size() > std::numeric_limits<std::uint32_t>::max()) {
        throw InvalidArgument("blob too large for a frame");
    }
    w.u32(static_cast<std::uint32_t>(blob.size()));
    w.bytes(blob);
}

std::vector<std::uint8_t> read_blob(ByteReader& r) {
    const auto n = r.u32();
    const auto b = r.bytes(n);
    return {b.begin(), b.end()};
}

ResponseMessage failure(Status status, std::string text) {
    ResponseMessage r;
    r.status = status;
    r.error_text = std::move(text);
    return r;
}

} // namespace

std::vector<std::uint8_t> encode_query(const QueryMessage& q) {
    ByteWriter w;
    w.text(kQueryMagic);
    w.u8(q.version);
    w.u16(q.eta);
    w.u16(q.alpha);
    write_blob(w, q.pca_blob);
    write_blob(w, q.nmf_blob);
    return w.take();
}

QueryMessage decode_query(std::span<const std::uint8_t> payload) {
    ByteReader r(payload);
    r.expect_magic(kQueryMagic);
    QueryMessage q;
    q.version = r.u8();
    q.eta = r.u16();
    q.alpha = r.u16();
    q.pca_blob = read_blob(r);
    q.nmf_blob = read_blob(r);
    if (r.remaining() != 0) {
        throw FormatError("trailing bytes after query");
    }
    return q;
}

std::vector<std::uint8_t> encode_response(const ResponseMessage& resp) {
    if (resp.results.size() > 0xFFFFu) {
        throw InvalidArgument("too many results for one response");
    }
    ByteWriter w;
    w.text(kResponseMagic);
    w.u8(static_cast<std::uint8_t>(resp.status));
    w.u16(static_cast<std::uint16_t>(resp.results.size()));
    for (const auto& e : resp.results) {
        w.short_string(e.object_id);
        w.f32(e.score);
        w.u16(e.rank);
    }
    w.short_string(resp.error_text);
    return w.take();
}

ResponseMessage decode_response(std::span<const std::uint8_t> payload) {
    ByteReader r(payload);
    r.expect_magic(kResponseMagic);
    ResponseMessage resp;
    const auto status = r.u8();
    if (status > static_cast<std::uint8_t>(Status::processing_error)) {
        throw FormatError("unknown status " + std::to_string(status));
    }
    resp.status = static_cast<Status>(status);
    const auto count = r.u16();
    resp.results.reserve(count);
    for (std::uint16_t i = 0; i < count; ++i) {
        ResultEntry e;
        e.object_id = r.short_string();
        e.score = r.f32();
        e.rank = r.u16();
        resp.results.push_back(std::move(e));
    }
    resp.error_text = r.short_string();
    if (r.remaining() != 0) {
        throw FormatError("trailing bytes after response");
    }
    return resp;
}

std::vector<std::uint8_t> frame(std::span<const std::uint8_t> payload) {
    if (payload.size() > std::numeric_limits<std::uint32_t>::max()) {
        throw InvalidArgument("payload too large for a frame");
    }
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(payload.size()));
    w.bytes(payload);
    return w.take();
}

ResponseMessage response_from(const RankedList& list) {
    ResponseMessage resp;
    resp.results.reserve(list.size());
    for (std::size_t i = 0; i < list.size(); ++i) {
        const auto& e = list.entries[i];
        resp.results.push_back({e.object_id, static_cast<float>(e.score), static_cast<std::uint16_t>(i + 1)});
    }
    return resp;
}

RankedList ranked_list_from(const ResponseMessage& resp, int eta) {
    RankedList out;
    out.eta = eta;
    for (std::size_t i = 0; i < resp.results.size(); ++i) {
        const auto& e = resp.results[i];
        if (e.rank != i + 1) {
            throw FormatError("response ranks are not contiguous");
        }
        out.entries.push_back({e.object_id, "", static_cast<double>(e.score)});
    }
    return out;
}

ResponseMessage answer_query(const ObjectIndex& index, std::span<const std::uint8_t> payload) {
    QueryMessage q;
    std::optional<QuantizedLoadings> pca_q;
    std::optional<QuantizedLoadings> nmf_q;
    try {
        q = decode_query(payload);
        pca_q.emplace(decode(q.pca_blob));
        nmf_q.emplace(decode(q.nmf_blob));
    } catch (const std::exception& e) {
        return failure(Status::malformed_frame, std::string("malformed frame: ") + e.what());
    }

    if (q.version != kProtocolVersion) {
        return failure(Status::invalid_parameters,
                       "invalid parameters: unsupported protocol version " + std::to_string(q.version));
    }
    if (q.eta == 0 || q.alpha > q.eta) {
        return failure(Status::invalid_parameters, "invalid parameters: need 1 <= eta and alpha <= eta");
    }
    if (pca_q->kind() != LoadingKind::pca || nmf_q->kind() != LoadingKind::nmf) {
        return failure(Status::invalid_parameters, "invalid parameters: blobs must be PCA then NMF");
    }
    if (pca_q->dim() != nmf_q->dim() || pca_q->dim() != index.dim()) {
        return failure(Status::invalid_parameters,
                       "invalid parameters: descriptor dimension does not match the index");
    }

    try {
        const auto list = retrieve_combined(dequantize(*pca_q), dequantize(*nmf_q), index, q.eta, q.alpha);
        return response_from(list);
    } catch (const std::exception& e) {
        return failure(Status::processing_error, std::string("processing error: ") + e.what());
    }
}

} // namespace facret
