#pragma once

// Little-endian byte writer/reader shared by every binary layout in the
// project (descriptor files, quantized blobs, index files, wire frames).

#include "facret/errors.hpp"

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace facret {

class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }

    void u16(std::uint16_t v) {
        buf_.push_back(static_cast<std::uint8_t>(v & 0xFFu));
        buf_.push_back(static_cast<std::uint8_t>(v >> 8));
    }

    void u32(std::uint32_t v) {
        for (int s = 0; s < 32; s += 8) {
            buf_.push_back(static_cast<std::uint8_t>((v >> s) & 0xFFu));
        }
    }

    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

    void bytes(std::span<const std::uint8_t> data) {
        buf_.insert(buf_.end(), data.begin(), data.end());
    }

    void text(std::string_view s) {
        buf_.insert(buf_.end(), s.begin(), s.end());
    }

    /// u16 length prefix followed by the raw UTF-8 bytes.
    void short_string(std::string_view s) {
        if (s.size() > 0xFFFFu) {
            throw InvalidArgument("string longer than 65535 bytes");
        }
        u16(static_cast<std::uint16_t>(s.size()));
        text(s);
    }

    std::size_t size() const { return buf_.size(); }
    std::vector<std::uint8_t>& buffer() { return buf_; }
    std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
    std::vector<std::uint8_t> buf_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

    std::uint8_t u8() {
        need(1);
        return data_[pos_++];
    }

    std::uint16_t u16() {
        need(2);
        auto v = static_cast<std::uint16_t>(data_[pos_] | (data_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
        }
        pos_ += 4;
        return v;
    }

    float f32() { return std::bit_cast<float>(u32()); }

    std::span<const std::uint8_t> bytes(std::size_t n) {
        need(n);
        auto out = data_.subspan(pos_, n);
        pos_ += n;
        return out;
    }

    std::string text(std::size_t n) {
        auto b = bytes(n);
        return std::string(b.begin(), b.end());
    }

    std::string short_string() { return text(u16()); }

    /// Consumes `magic.size()` bytes and checks them against `magic`.
    void expect_magic(std::string_view magic) {
        if (remaining() < magic.size() ||
            std::memcmp(data_.data() + pos_, magic.data(), magic.size()) != 0) {
            throw FormatError("bad magic, expected \"" + std::string(magic) + "\"");
        }
        pos_ += magic.size();
    }

    std::size_t remaining() const { return data_.size() - pos_; }
    std::size_t position() const { return pos_; }

private:
    void need(std::size_t n) const {
        if (remaining() < n) {
            throw FormatError("truncated input");
        }
    }

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

} // namespace facret
