#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "spns/bytes.hpp"
#include "spns/crypto.hpp"

namespace spns {

/// Opaque 4-byte slice selection tag (S-NSSAI).
struct Nssai {
    std::array<std::uint8_t, 4> bytes{};

    static Nssai from_bytes(ByteView b);
    static Nssai from_u32(std::uint32_t v);
    friend bool operator==(const Nssai&, const Nssai&) = default;
};

/// A RAN's signed identity and capability record.
struct RouterDescriptor {
    std::string node_name;
    std::uint32_t gnb_id = 0;
    std::uint16_t location_area = 0;
    std::vector<Nssai> supported_nssai;
    Bytes slice_part;
    IdentityPublicKey identity_public;
    OnionPublicKey onion_public;
    Address address;
    Bytes signature;

    /// TLV of every field except the signature, in declaration order.
    Bytes signed_fields() const;
    /// signed_fields() ‖ TLV(signature).
    Bytes serialize() const;
    /// Throws Malformed on a bad layout; does not check the signature.
    static RouterDescriptor deserialize(ByteView wire);

    bool supports(const Nssai& nssai) const;
    std::array<std::uint8_t, 8> fingerprint() const { return identity_public.fingerprint(); }

    friend bool operator==(const RouterDescriptor& a, const RouterDescriptor& b) { return a.serialize() == b.serialize(); }
};

/// Signs the descriptor with the node's long-term identity key, installing
/// the matching identity_public first.
RouterDescriptor descriptor_sign(RouterDescriptor fields, const IdentityKeyPair& identity);
bool descriptor_verify(const RouterDescriptor& d);

struct DirectorySnapshot {
    std::uint32_t epoch = 0;
    OnionPublicKey core_public;
    Address core_address;
    std::vector<RouterDescriptor> descriptors;
    Bytes directory_signature;

    Bytes signed_fields() const;
    Bytes serialize() const;
    static DirectorySnapshot deserialize(ByteView wire);

    /// Snapshot signature under the pinned directory key and every
    /// contained descriptor's own signature.
    bool verify(const IdentityPublicKey& directory_key) const;

    const RouterDescriptor* find(Address address) const;
};

/// The AMF-hosted directory service: a single trusted endpoint that accepts
/// verified descriptors and serves signed snapshots.
class Directory {
public:
    Directory(IdentityKeyPair identity, OnionPublicKey core_public, Address core_address, std::uint32_t epoch = 0);

    /// Throws InvalidDescriptor unless the descriptor verifies. Republishing
    /// the same identity replaces the earlier descriptor.
    void publish(const RouterDescriptor& d);

    /// Throws StaleEpoch if expected_epoch is given and the core key has
    /// rotated since the caller last looked.
    DirectorySnapshot fetch_snapshot(std::optional<std::uint32_t> expected_epoch = std::nullopt) const;

    /// Installs a new core short-term key and bumps the epoch.
    void rotate_core_key(OnionPublicKey new_key);

    std::uint32_t epoch() const { return epoch_; }
    const IdentityPublicKey& public_key() const { return identity_.public_key(); }

private:
    IdentityKeyPair identity_;
    OnionPublicKey core_public_;
    Address core_address_;
    std::uint32_t epoch_;
    std::vector<RouterDescriptor> descriptors_;
};

struct PathSelection {
    RouterDescriptor secondary;
    RouterDescriptor master;
};

/// Seeded uniform choice of two distinct RANs supporting the NSSAI.
/// Throws InsufficientRans when fewer than two qualify.
PathSelection select_path(const DirectorySnapshot& snapshot, const Nssai& requested, std::uint64_t policy_seed);

/// n-hop generalisation; the returned order is entry first, master last.
std::vector<RouterDescriptor> select_hops(const DirectorySnapshot& snapshot, const Nssai& requested,
                                          std::size_t hops, std::uint64_t policy_seed);

} // namespace spns
