#include "spns/nsi.hpp"

#include <algorithm>

namespace spns {

bool NsiId::assigned() const
{
    return std::any_of(bytes.begin(), bytes.end(), [](auto b) { return b != 0; });
}

NsiId NsiId::from_bytes(ByteView b)
{
    if (b.size() != 16) throw Error(ErrorCode::InvalidArgument, "NSI ID must be 16 bytes");
    NsiId id;
    std::copy(b.begin(), b.end(), id.bytes.begin());
    return id;
}

NsiPartition partition(const NsiId& id, std::size_t hops)
{
    if (hops == 0) throw Error(ErrorCode::InvalidArgument, "partition needs at least one hop");
    if (hops > kMaxNsiHops) throw Error(ErrorCode::TooManyHops, std::to_string(hops) + " hops leave empty segments");
    const std::size_t segments = hops + 1;
    const std::size_t base = id.bytes.size() / segments;
    NsiPartition p;
    std::size_t off = 0;
    for (std::size_t i = 0; i < segments; ++i) {
        const std::size_t n = (i + 1 == segments) ? id.bytes.size() - off : base;
        p.parts.emplace_back(id.bytes.begin() + off, id.bytes.begin() + off + n);
        off += n;
    }
    return p;
}

NsiId join(const NsiPartition& p)
{
    Bytes all;
    for (const auto& part : p.parts) append(all, part);
    if (all.size() != 16) throw Error(ErrorCode::InvalidArgument, "partition does not total 16 bytes");
    return NsiId::from_bytes(all);
}

std::string to_urn(const NsiPartition& p)
{
    std::string out = "urn:nsi:";
    for (std::size_t i = 0; i < p.parts.size(); ++i) {
        if (i) out += ':';
        out += to_hex(p.parts[i]);
    }
    return out;
}

NsiPartition from_urn(std::string_view urn)
{
    static constexpr std::string_view prefix = "urn:nsi:";
    if (!urn.starts_with(prefix)) throw Error(ErrorCode::MalformedUrn, "missing urn:nsi: prefix");
    urn.remove_prefix(prefix.size());

    NsiPartition p;
    std::size_t total = 0;
    for (;;) {
        auto colon = urn.find(':');
        auto part = urn.substr(0, colon);
        if (part.size() < 2 || part.size() % 2 != 0)
            throw Error(ErrorCode::MalformedUrn, "slice part must be a whole number of bytes");
        if (!std::all_of(part.begin(), part.end(), [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); }))
            throw Error(ErrorCode::MalformedUrn, "slice part must be lowercase hex");
        p.parts.push_back(from_hex(part));
        total += part.size() / 2;
        if (colon == std::string_view::npos) break;
        urn.remove_prefix(colon + 1);
    }
    if (total != 16) throw Error(ErrorCode::MalformedUrn, "slice parts must total 16 bytes");
    return p;
}

} // namespace spns
