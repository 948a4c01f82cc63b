#pragma once

// Decrypts a whole onion in one pass from the hop keys alone: each hop's
// keystream is generated once with the reference AES and XORed over the
// region that hop's layer covers. Layer boundaries are read from the
// length prefix of each hop's first relay body. It shares no code with
// build_onion or peel_layer.

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "ref_aes.hpp"

namespace oracle {

constexpr std::size_t kCell = 498;
constexpr std::size_t kRelayHeader = 9;
constexpr std::size_t kRelayBody = kCell - kRelayHeader;

struct HopView {
    /// Byte offset in the ciphertext where this hop's layer begins.
    std::size_t layer_offset = 0;
    /// Cells holding the hop's own message.
    std::size_t own_cells = 0;
    /// Reassembled message content: u16 info length ‖ info ‖ tail.
    std::vector<std::uint8_t> content;
    /// The rest of the onion after removing layers 1..i, as hop i forwards it.
    std::vector<std::uint8_t> forwarded;
};

struct Decrypted {
    std::vector<HopView> hops;
};

inline std::uint32_t be32(const std::uint8_t* p)
{
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) | p[3];
}

inline std::uint16_t be16(const std::uint8_t* p)
{
    return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}

inline Decrypted decrypt_all(const std::vector<std::array<std::uint8_t, 16>>& keys, const std::vector<std::uint8_t>& c)
{
    if (c.size() % kCell != 0) throw std::runtime_error("ciphertext is not whole cells");
    const std::size_t n = c.size();
    // ks[i] covers [offset_i, n).
    std::vector<std::vector<std::uint8_t>> ks;
    std::vector<std::size_t> offsets;
    Decrypted out;
    std::size_t offset = 0;
    for (std::size_t h = 0; h < keys.size(); ++h) {
        if (offset >= n) throw std::runtime_error("onion ended before hop " + std::to_string(h));
        std::vector<std::uint8_t> stream(n - offset, 0);
        ref::Ctr(keys[h].data(), ref::Block{}).apply(stream);
        ks.push_back(std::move(stream));
        offsets.push_back(offset);

        auto plain_at = [&](std::size_t pos, std::size_t layers) {
            std::uint8_t b = c[pos];
            for (std::size_t l = 0; l < layers; ++l) b ^= ks[l][pos - offsets[l]];
            return b;
        };

        // First cell of this hop's own message: relay header, then the u32
        // message length at the start of the body.
        std::array<std::uint8_t, 13> head{};
        for (std::size_t i = 0; i < head.size(); ++i) head[i] = plain_at(offset + i, h + 1);
        const std::size_t total = be32(head.data() + kRelayHeader) + 4;
        const std::size_t cells = (total + kRelayBody - 1) / kRelayBody;

        HopView view;
        view.layer_offset = offset;
        view.own_cells = cells;
        std::vector<std::uint8_t> framed;
        for (std::size_t k = 0; k < cells; ++k) {
            const std::size_t base = offset + k * kCell;
            if (base + kCell > n) throw std::runtime_error("own message runs past the onion");
            std::array<std::uint8_t, kCell> cell{};
            for (std::size_t i = 0; i < kCell; ++i) cell[i] = plain_at(base + i, h + 1);
            const std::size_t len = be16(cell.data() + 7);
            if (len > kRelayBody) throw std::runtime_error("relay body too long");
            framed.insert(framed.end(), cell.begin() + kRelayHeader, cell.begin() + static_cast<long>(kRelayHeader + len));
        }
        if (framed.size() != total) throw std::runtime_error("framed length mismatch");
        view.content.assign(framed.begin() + 4, framed.end());

        offset += cells * kCell;
        view.forwarded.resize(n - offset);
        for (std::size_t pos = offset; pos < n; ++pos) view.forwarded[pos - offset] = plain_at(pos, h + 1);
        out.hops.push_back(std::move(view));
    }
    if (offset != n) throw std::runtime_error("trailing cells after the innermost layer");
    return out;
}

} // namespace oracle
