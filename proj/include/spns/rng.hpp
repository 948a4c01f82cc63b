#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "spns/bytes.hpp"

namespace spns {

/// Randomness source for every protocol draw (DH exponents, ephemeral keys,
/// link IDs, pseudonyms). Unseeded instances read the OS CSPRNG; seeded
/// instances run a SHA-256 counter DRBG so that whole runs are reproducible.
class Rng {
public:
    Rng();
    explicit Rng(std::optional<std::uint64_t> seed);
    explicit Rng(ByteView seed_material);

    void fill(std::span<std::uint8_t> out);
    Bytes bytes(std::size_t n);
    std::uint32_t u32();
    std::uint64_t u64();
    /// Uniform in [0, bound). bound must be > 0.
    std::uint64_t uniform(std::uint64_t bound);

    bool deterministic() const { return deterministic_; }

    /// Independent child stream. Deterministic parents yield deterministic
    /// children keyed by label; OS-backed parents yield OS-backed children.
    Rng derive(std::string_view label);

private:
    void refill();

    bool deterministic_ = false;
    std::array<std::uint8_t, 32> state_{};
    std::uint64_t counter_ = 0;
    std::array<std::uint8_t, 32> block_{};
    std::size_t block_pos_ = 32;
};

} // namespace spns
