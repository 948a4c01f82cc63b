#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spns/error.hpp"

namespace spns {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

std::string to_hex(ByteView bytes);
/// Accepts upper or lower case; throws Malformed on odd length or bad digits.
Bytes from_hex(std::string_view hex);

inline Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

inline void append(Bytes& out, ByteView more) { out.insert(out.end(), more.begin(), more.end()); }

Bytes concat(std::initializer_list<ByteView> parts);

/// True if needle occurs as a contiguous run inside haystack.
bool contains(ByteView haystack, ByteView needle);

/// Routable node address. Opaque 8-byte token; the transports map it to a
/// simulated endpoint or a socket peer.
struct Address {
    std::uint64_t value = 0;

    friend bool operator==(const Address&, const Address&) = default;
    friend auto operator<=>(const Address&, const Address&) = default;

    std::array<std::uint8_t, 8> bytes() const;
    static Address from_bytes(ByteView b);
    std::string to_string() const;
};

// Big-endian writer / reader used by every wire and TLV encoding.

class ByteWriter {
public:
    ByteWriter() = default;
    explicit ByteWriter(std::size_t reserve) { buf_.reserve(reserve); }

    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void raw(ByteView v) { append(buf_, v); }

    /// Tag (1 byte) ‖ length (4 bytes) ‖ value.
    void tlv(std::uint8_t tag, ByteView value);

    const Bytes& bytes() const& { return buf_; }
    Bytes take() && { return std::move(buf_); }
    std::size_t size() const { return buf_.size(); }

private:
    Bytes buf_;
};

class ByteReader {
public:
    explicit ByteReader(ByteView data) : data_(data) {}

    std::uint8_t u8();
    std::uint16_t u16();
    std::uint32_t u32();
    std::uint64_t u64();
    ByteView raw(std::size_t n);
    ByteView rest();

    std::size_t remaining() const { return data_.size() - pos_; }
    bool empty() const { return remaining() == 0; }
    std::size_t position() const { return pos_; }

private:
    void need(std::size_t n) const;

    ByteView data_;
    std::size_t pos_ = 0;
};

struct TlvField {
    std::uint8_t tag;
    ByteView value;
};

/// Splits a TLV sequence; throws Malformed on truncation.
std::vector<TlvField> parse_tlvs(ByteView data);

void put_u16(std::span<std::uint8_t> at, std::uint16_t v);
void put_u32(std::span<std::uint8_t> at, std::uint32_t v);
std::uint16_t get_u16(ByteView at);
std::uint32_t get_u32(ByteView at);

} // namespace spns
