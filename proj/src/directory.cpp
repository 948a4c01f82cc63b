#include "spns/directory.hpp"

#include <algorithm>

namespace spns {

namespace {

enum DescriptorTag : std::uint8_t {
    tag_name = 1,
    tag_gnb_id = 2,
    tag_location_area = 3,
    tag_nssai = 4,
    tag_slice_part = 5,
    tag_identity = 6,
    tag_onion = 7,
    tag_address = 8,
    tag_signature = 9,
};

enum SnapshotTag : std::uint8_t {
    snap_epoch = 1,
    snap_core_key = 2,
    snap_core_address = 3,
    snap_descriptor = 4,
    snap_signature = 5,
};

constexpr std::size_t kMaxNodeName = 64;

template <typename T>
T read_be(ByteView v)
{
    if (v.size() != sizeof(T)) throw Error(ErrorCode::Malformed, "integer field has wrong width");
    T out = 0;
    for (auto b : v) out = static_cast<T>((out << 8) | b);
    return out;
}

Bytes be32(std::uint32_t v)
{
    ByteWriter w;
    w.u32(v);
    return std::move(w).take();
}

} // namespace

Nssai Nssai::from_bytes(ByteView b)
{
    if (b.size() != 4) throw Error(ErrorCode::Malformed, "NSSAI must be 4 bytes");
    Nssai n;
    std::copy(b.begin(), b.end(), n.bytes.begin());
    return n;
}

Nssai Nssai::from_u32(std::uint32_t v)
{
    Nssai n;
    put_u32(n.bytes, v);
    return n;
}

Bytes RouterDescriptor::signed_fields() const
{
    if (node_name.size() > kMaxNodeName) throw Error(ErrorCode::InvalidArgument, "node name exceeds 64 bytes");
    ByteWriter w;
    w.tlv(tag_name, to_bytes(node_name));
    w.tlv(tag_gnb_id, be32(gnb_id));
    const std::array<std::uint8_t, 2> la{static_cast<std::uint8_t>(location_area >> 8), static_cast<std::uint8_t>(location_area)};
    w.tlv(tag_location_area, la);
    Bytes nssai;
    for (const auto& n : supported_nssai) append(nssai, n.bytes);
    w.tlv(tag_nssai, nssai);
    w.tlv(tag_slice_part, slice_part);
    w.tlv(tag_identity, identity_public.bytes);
    w.tlv(tag_onion, onion_public.to_der());
    w.tlv(tag_address, address.bytes());
    return std::move(w).take();
}

Bytes RouterDescriptor::serialize() const
{
    ByteWriter w;
    w.raw(signed_fields());
    w.tlv(tag_signature, signature);
    return std::move(w).take();
}

RouterDescriptor RouterDescriptor::deserialize(ByteView wire)
{
    auto fields = parse_tlvs(wire);
    static constexpr std::array<std::uint8_t, 9> order{tag_name, tag_gnb_id, tag_location_area, tag_nssai, tag_slice_part,
                                                       tag_identity, tag_onion, tag_address, tag_signature};
    if (fields.size() != order.size()) throw Error(ErrorCode::Malformed, "descriptor field count");
    for (std::size_t i = 0; i < order.size(); ++i)
        if (fields[i].tag != order[i]) throw Error(ErrorCode::Malformed, "descriptor field order");

    RouterDescriptor d;
    if (fields[0].value.size() > kMaxNodeName) throw Error(ErrorCode::Malformed, "node name exceeds 64 bytes");
    d.node_name.assign(fields[0].value.begin(), fields[0].value.end());
    d.gnb_id = read_be<std::uint32_t>(fields[1].value);
    d.location_area = read_be<std::uint16_t>(fields[2].value);
    if (fields[3].value.size() % 4 != 0) throw Error(ErrorCode::Malformed, "NSSAI list length");
    for (std::size_t i = 0; i < fields[3].value.size(); i += 4) d.supported_nssai.push_back(Nssai::from_bytes(fields[3].value.subspan(i, 4)));
    d.slice_part.assign(fields[4].value.begin(), fields[4].value.end());
    if (fields[5].value.size() != 32) throw Error(ErrorCode::Malformed, "identity key length");
    std::copy(fields[5].value.begin(), fields[5].value.end(), d.identity_public.bytes.begin());
    d.onion_public = OnionPublicKey::from_der(fields[6].value);
    d.address = Address::from_bytes(fields[7].value);
    d.signature.assign(fields[8].value.begin(), fields[8].value.end());
    return d;
}

bool RouterDescriptor::supports(const Nssai& nssai) const
{
    return std::find(supported_nssai.begin(), supported_nssai.end(), nssai) != supported_nssai.end();
}

RouterDescriptor descriptor_sign(RouterDescriptor fields, const IdentityKeyPair& identity)
{
    fields.identity_public = identity.public_key();
    fields.signature = sign(identity, fields.signed_fields());
    return fields;
}

bool descriptor_verify(const RouterDescriptor& d)
{
    if (!d.onion_public.pkey()) return false;
    try {
        return verify(d.identity_public, d.signed_fields(), d.signature);
    } catch (const Error&) {
        return false;
    }
}

// ---------------------------------------------------------------------------

Bytes DirectorySnapshot::signed_fields() const
{
    ByteWriter w;
    w.tlv(snap_epoch, be32(epoch));
    w.tlv(snap_core_key, core_public.to_der());
    w.tlv(snap_core_address, core_address.bytes());
    for (const auto& d : descriptors) w.tlv(snap_descriptor, d.serialize());
    return std::move(w).take();
}

Bytes DirectorySnapshot::serialize() const
{
    ByteWriter w;
    w.raw(signed_fields());
    w.tlv(snap_signature, directory_signature);
    return std::move(w).take();
}

DirectorySnapshot DirectorySnapshot::deserialize(ByteView wire)
{
    auto fields = parse_tlvs(wire);
    if (fields.size() < 4) throw Error(ErrorCode::Malformed, "snapshot too short");
    if (fields[0].tag != snap_epoch || fields[1].tag != snap_core_key || fields[2].tag != snap_core_address ||
        fields.back().tag != snap_signature)
        throw Error(ErrorCode::Malformed, "snapshot field order");
    DirectorySnapshot s;
    s.epoch = read_be<std::uint32_t>(fields[0].value);
    s.core_public = OnionPublicKey::from_der(fields[1].value);
    s.core_address = Address::from_bytes(fields[2].value);
    for (std::size_t i = 3; i + 1 < fields.size(); ++i) {
        if (fields[i].tag != snap_descriptor) throw Error(ErrorCode::Malformed, "unexpected snapshot field");
        s.descriptors.push_back(RouterDescriptor::deserialize(fields[i].value));
    }
    s.directory_signature.assign(fields.back().value.begin(), fields.back().value.end());
    return s;
}

bool DirectorySnapshot::verify(const IdentityPublicKey& directory_key) const
{
    if (!spns::verify(directory_key, signed_fields(), directory_signature)) return false;
    return std::all_of(descriptors.begin(), descriptors.end(), descriptor_verify);
}

const RouterDescriptor* DirectorySnapshot::find(Address address) const
{
    auto it = std::find_if(descriptors.begin(), descriptors.end(), [&](const auto& d) { return d.address == address; });
    return it == descriptors.end() ? nullptr : &*it;
}

// ---------------------------------------------------------------------------

Directory::Directory(IdentityKeyPair identity, OnionPublicKey core_public, Address core_address, std::uint32_t epoch)
    : identity_(std::move(identity)), core_public_(std::move(core_public)), core_address_(core_address), epoch_(epoch)
{
}

void Directory::publish(const RouterDescriptor& d)
{
    if (!descriptor_verify(d)) throw Error(ErrorCode::InvalidDescriptor, "descriptor signature does not verify: " + d.node_name);
    auto it = std::find_if(descriptors_.begin(), descriptors_.end(),
                           [&](const auto& e) { return e.identity_public == d.identity_public; });
    if (it != descriptors_.end())
        *it = d;
    else
        descriptors_.push_back(d);
}

DirectorySnapshot Directory::fetch_snapshot(std::optional<std::uint32_t> expected_epoch) const
{
    if (expected_epoch && *expected_epoch != epoch_)
        throw Error(ErrorCode::StaleEpoch, "core key rotated to epoch " + std::to_string(epoch_));
    DirectorySnapshot s;
    s.epoch = epoch_;
    s.core_public = core_public_;
    s.core_address = core_address_;
    s.descriptors = descriptors_;
    s.directory_signature = sign(identity_, s.signed_fields());
    return s;
}

void Directory::rotate_core_key(OnionPublicKey new_key)
{
    core_public_ = std::move(new_key);
    ++epoch_;
}

std::vector<RouterDescriptor> select_hops(const DirectorySnapshot& snapshot, const Nssai& requested,
                                          std::size_t hops, std::uint64_t policy_seed)
{
    std::vector<const RouterDescriptor*> candidates;
    for (const auto& d : snapshot.descriptors)
        if (d.supports(requested)) candidates.push_back(&d);
    if (hops == 0 || candidates.size() < hops)
        throw Error(ErrorCode::InsufficientRans, std::to_string(candidates.size()) + " RANs support the requested NSSAI");

    Rng rng(policy_seed);
    for (std::size_t i = 0; i < hops; ++i) {
        auto j = i + rng.uniform(candidates.size() - i);
        std::swap(candidates[i], candidates[j]);
    }
    std::vector<RouterDescriptor> out;
    for (std::size_t i = 0; i < hops; ++i) out.push_back(*candidates[i]);
    return out;
}

PathSelection select_path(const DirectorySnapshot& snapshot, const Nssai& requested, std::uint64_t policy_seed)
{
    auto hops = select_hops(snapshot, requested, 2, policy_seed);
    return PathSelection{std::move(hops[0]), std::move(hops[1])};
}

} // namespace spns
