#include "spns/rng.hpp"

#include <openssl/rand.h>
#include <openssl/sha.h>

namespace spns {

Rng::Rng() = default;

Rng::Rng(std::optional<std::uint64_t> seed)
{
    if (!seed) return;
    ByteWriter w;
    w.raw(to_bytes("spns-drbg"));
    w.u64(*seed);
    *this = Rng(ByteView(w.bytes()));
}

Rng::Rng(ByteView seed_material) : deterministic_(true)
{
    SHA256(seed_material.data(), seed_material.size(), state_.data());
}

void Rng::refill()
{
    std::array<std::uint8_t, 40> input{};
    std::copy(state_.begin(), state_.end(), input.begin());
    for (int i = 0; i < 8; ++i) input[32 + i] = static_cast<std::uint8_t>(counter_ >> (56 - 8 * i));
    ++counter_;
    SHA256(input.data(), input.size(), block_.data());
    block_pos_ = 0;
}

void Rng::fill(std::span<std::uint8_t> out)
{
    if (!deterministic_) {
        if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1)
            throw Error(ErrorCode::CryptoFailure, "RAND_bytes failed");
        return;
    }
    for (auto& b : out) {
        if (block_pos_ == block_.size()) refill();
        b = block_[block_pos_++];
    }
}

Bytes Rng::bytes(std::size_t n)
{
    Bytes out(n);
    fill(out);
    return out;
}

std::uint32_t Rng::u32()
{
    std::array<std::uint8_t, 4> b{};
    fill(b);
    return get_u32(b);
}

std::uint64_t Rng::u64()
{
    std::uint64_t hi = u32();
    return (hi << 32) | u32();
}

std::uint64_t Rng::uniform(std::uint64_t bound)
{
    if (bound == 0) throw Error(ErrorCode::InvalidArgument, "uniform bound must be positive");
    // Rejection sampling avoids modulo bias.
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    for (;;) {
        auto v = u64();
        if (v < limit) return v % bound;
    }
}

Rng Rng::derive(std::string_view label)
{
    if (!deterministic_) return Rng();
    ByteWriter w;
    w.raw(bytes(32));
    w.raw(to_bytes(label));
    return Rng(ByteView(w.bytes()));
}

} // namespace spns
