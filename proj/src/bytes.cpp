#include "spns/bytes.hpp"

#include <algorithm>
#include <cstdio>

namespace spns {

std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Malformed: return "Malformed";
    case ErrorCode::CryptoFailure: return "CryptoFailure";
    case ErrorCode::Io: return "Io";
    case ErrorCode::DegenerateHalfKey: return "DegenerateHalfKey";
    case ErrorCode::DecryptionFailure: return "DecryptionFailure";
    case ErrorCode::BadLength: return "BadLength";
    case ErrorCode::UnknownCommand: return "UnknownCommand";
    case ErrorCode::NonzeroReserved: return "NonzeroReserved";
    case ErrorCode::BodyOverflow: return "BodyOverflow";
    case ErrorCode::MissingFragment: return "MissingFragment";
    case ErrorCode::TooManyHops: return "TooManyHops";
    case ErrorCode::MalformedUrn: return "MalformedUrn";
    case ErrorCode::InvalidDescriptor: return "InvalidDescriptor";
    case ErrorCode::StaleEpoch: return "StaleEpoch";
    case ErrorCode::InsufficientRans: return "InsufficientRans";
    case ErrorCode::StateError: return "StateError";
    case ErrorCode::KeyConfirmMismatch: return "KeyConfirmMismatch";
    case ErrorCode::CircuitNotEstablished: return "CircuitNotEstablished";
    case ErrorCode::DigestMismatch: return "DigestMismatch";
    case ErrorCode::MalformedInfo: return "MalformedInfo";
    case ErrorCode::ReplayRejected: return "ReplayRejected";
    case ErrorCode::DuplicateLink: return "DuplicateLink";
    case ErrorCode::UnknownNextHop: return "UnknownNextHop";
    case ErrorCode::LinkExhaustion: return "LinkExhaustion";
    case ErrorCode::EpochMismatch: return "EpochMismatch";
    case ErrorCode::AttestationFailure: return "AttestationFailure";
    case ErrorCode::SingleRanRejected: return "SingleRanRejected";
    case ErrorCode::UnknownLink: return "UnknownLink";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::UnknownEndpoint: return "UnknownEndpoint";
    case ErrorCode::LivelockDetected: return "LivelockDetected";
    case ErrorCode::MalformedLog: return "MalformedLog";
    case ErrorCode::ScenarioFailure: return "ScenarioFailure";
    }
    return "Unknown";
}

std::string to_hex(ByteView bytes)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.resize(bytes.size() * 2);
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        out[2 * i] = digits[bytes[i] >> 4];
        out[2 * i + 1] = digits[bytes[i] & 0x0f];
    }
    return out;
}

namespace {

int hex_value(char c)
{
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

} // namespace

Bytes from_hex(std::string_view hex)
{
    if (hex.size() % 2 != 0) throw Error(ErrorCode::Malformed, "odd-length hex string");
    Bytes out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        int hi = hex_value(hex[2 * i]);
        int lo = hex_value(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) throw Error(ErrorCode::Malformed, "invalid hex digit");
        out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return out;
}

Bytes concat(std::initializer_list<ByteView> parts)
{
    std::size_t total = 0;
    for (auto p : parts) total += p.size();
    Bytes out;
    out.reserve(total);
    for (auto p : parts) append(out, p);
    return out;
}

bool contains(ByteView haystack, ByteView needle)
{
    if (needle.empty()) return true;
    return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) != haystack.end();
}

std::array<std::uint8_t, 8> Address::bytes() const
{
    std::array<std::uint8_t, 8> out{};
    for (int i = 0; i < 8; ++i) out[i] = static_cast<std::uint8_t>(value >> (56 - 8 * i));
    return out;
}

Address Address::from_bytes(ByteView b)
{
    if (b.size() != 8) throw Error(ErrorCode::Malformed, "address must be 8 bytes");
    std::uint64_t v = 0;
    for (auto byte : b) v = (v << 8) | byte;
    return Address{v};
}

std::string Address::to_string() const
{
    auto b = bytes();
    return to_hex(b);
}

void ByteWriter::u16(std::uint16_t v)
{
    buf_.push_back(static_cast<std::uint8_t>(v >> 8));
    buf_.push_back(static_cast<std::uint8_t>(v));
}

void ByteWriter::u32(std::uint32_t v)
{
    for (int s = 24; s >= 0; s -= 8) buf_.push_back(static_cast<std::uint8_t>(v >> s));
}

void ByteWriter::u64(std::uint64_t v)
{
    for (int s = 56; s >= 0; s -= 8) buf_.push_back(static_cast<std::uint8_t>(v >> s));
}

void ByteWriter::tlv(std::uint8_t tag, ByteView value)
{
    u8(tag);
    u32(static_cast<std::uint32_t>(value.size()));
    raw(value);
}

void ByteReader::need(std::size_t n) const
{
    if (remaining() < n) throw Error(ErrorCode::Malformed, "truncated input");
}

std::uint8_t ByteReader::u8()
{
    need(1);
    return data_[pos_++];
}

std::uint16_t ByteReader::u16()
{
    need(2);
    auto v = get_u16(data_.subspan(pos_, 2));
    pos_ += 2;
    return v;
}

std::uint32_t ByteReader::u32()
{
    need(4);
    auto v = get_u32(data_.subspan(pos_, 4));
    pos_ += 4;
    return v;
}

std::uint64_t ByteReader::u64()
{
    std::uint64_t hi = u32();
    return (hi << 32) | u32();
}

ByteView ByteReader::raw(std::size_t n)
{
    need(n);
    auto v = data_.subspan(pos_, n);
    pos_ += n;
    return v;
}

ByteView ByteReader::rest()
{
    return raw(remaining());
}

std::vector<TlvField> parse_tlvs(ByteView data)
{
    std::vector<TlvField> fields;
    ByteReader r(data);
    while (!r.empty()) {
        auto tag = r.u8();
        auto len = r.u32();
        fields.push_back({tag, r.raw(len)});
    }
    return fields;
}

void put_u16(std::span<std::uint8_t> at, std::uint16_t v)
{
    at[0] = static_cast<std::uint8_t>(v >> 8);
    at[1] = static_cast<std::uint8_t>(v);
}

void put_u32(std::span<std::uint8_t> at, std::uint32_t v)
{
    at[0] = static_cast<std::uint8_t>(v >> 24);
    at[1] = static_cast<std::uint8_t>(v >> 16);
    at[2] = static_cast<std::uint8_t>(v >> 8);
    at[3] = static_cast<std::uint8_t>(v);
}

std::uint16_t get_u16(ByteView at)
{
    return static_cast<std::uint16_t>((at[0] << 8) | at[1]);
}

std::uint32_t get_u32(ByteView at)
{
    return (std::uint32_t{at[0]} << 24) | (std::uint32_t{at[1]} << 16) | (std::uint32_t{at[2]} << 8) | at[3];
}

} // namespace spns
