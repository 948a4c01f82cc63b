#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "spns/bytes.hpp"

namespace spns {

/// 16-byte network slice instance identifier. All-zero is reserved as
/// "unassigned".
struct NsiId {
    std::array<std::uint8_t, 16> bytes{};

    bool assigned() const;
    static NsiId from_bytes(ByteView b);

    friend bool operator==(const NsiId&, const NsiId&) = default;
    friend auto operator<=>(const NsiId&, const NsiId&) = default;
};

/// The identifier split into h+1 ordered segments, one per hop plus the
/// core's segment last.
struct NsiPartition {
    std::vector<Bytes> parts;

    friend bool operator==(const NsiPartition&, const NsiPartition&) = default;
};

inline constexpr std::size_t kMaxNsiHops = 15;

/// Segment sizes are floor(16 / (hops + 1)) with the remainder on the last
/// segment: 5/5/6 for two hops. Throws TooManyHops when hops + 1 > 16 and
/// InvalidArgument for hops == 0.
NsiPartition partition(const NsiId& id, std::size_t hops);
/// Throws InvalidArgument unless the parts total exactly 16 bytes.
NsiId join(const NsiPartition& p);

/// "urn:nsi:" followed by lowercase-hex parts separated by ':'.
std::string to_urn(const NsiPartition& p);
/// Throws MalformedUrn on any deviation from the grammar.
NsiPartition from_urn(std::string_view urn);

} // namespace spns
