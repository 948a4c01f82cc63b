#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "spns/bytes.hpp"
#include "spns/rng.hpp"

// OpenSSL handle types, kept opaque to users of this header.
struct bignum_st;
struct evp_cipher_ctx_st;
struct evp_pkey_st;

namespace spns {

using Sha256Digest = std::array<std::uint8_t, 32>;

Sha256Digest sha256(ByteView data);
Sha256Digest sha256(std::initializer_list<ByteView> parts);

// ---------------------------------------------------------------------------
// Big integers and Diffie-Hellman
// ---------------------------------------------------------------------------

class BigInt {
public:
    BigInt();
    explicit BigInt(std::uint64_t v);
    BigInt(const BigInt& other);
    BigInt(BigInt&&) noexcept;
    BigInt& operator=(const BigInt& other);
    BigInt& operator=(BigInt&&) noexcept;
    ~BigInt();

    static BigInt from_bytes(ByteView big_endian);
    static BigInt from_hex(std::string_view hex);

    /// Left-padded big-endian encoding; throws InvalidArgument if it does not fit.
    Bytes to_bytes(std::size_t width) const;
    std::size_t num_bytes() const;
    std::size_t num_bits() const;
    std::uint64_t to_u64() const;

    /// (*this ^ exponent) mod modulus, constant-time exponentiation.
    BigInt mod_exp(const BigInt& exponent, const BigInt& modulus) const;
    BigInt operator-(std::uint64_t v) const;

    int compare(const BigInt& other) const;
    friend bool operator==(const BigInt& a, const BigInt& b) { return a.compare(b) == 0; }
    friend bool operator<(const BigInt& a, const BigInt& b) { return a.compare(b) < 0; }
    friend bool operator<=(const BigInt& a, const BigInt& b) { return a.compare(b) <= 0; }

    bool is_probable_prime() const;

    const bignum_st* get() const { return bn_; }

private:
    bignum_st* bn_;
};

class DhGroup {
public:
    /// Validates p prime and 1 < g < p; throws InvalidArgument otherwise.
    DhGroup(BigInt prime, BigInt generator);

    /// 2048-bit MODP group (RFC 3526 group 14), g = 2.
    static const DhGroup& modp2048();

    const BigInt& prime() const { return p_; }
    const BigInt& generator() const { return g_; }
    /// Width of the fixed big-endian element encoding.
    std::size_t element_bytes() const { return p_.num_bytes(); }

    friend bool operator==(const DhGroup& a, const DhGroup& b) { return a.p_ == b.p_ && a.g_ == b.g_; }

private:
    struct Trusted {};
    DhGroup(BigInt prime, BigInt generator, Trusted);

    BigInt p_;
    BigInt g_;
};

struct DhKeyPair {
    BigInt secret;
    BigInt public_half;

    Bytes public_bytes(const DhGroup& group) const { return public_half.to_bytes(group.element_bytes()); }
};

/// Draws x uniformly from [2, p-2], re-sampling degenerate halves.
DhKeyPair dh_generate(const DhGroup& group, Rng& rng);
/// Fixed-exponent keypair for oracle tests; accepts x in [1, p-2].
DhKeyPair dh_keypair_from_secret(const DhGroup& group, const BigInt& secret);

/// True when a half-key is 0, 1, p-1 or outside [0, p).
bool dh_is_degenerate(const DhGroup& group, const BigInt& half);

/// g^{xy} mod p. Throws DegenerateHalfKey on a degenerate peer half.
BigInt dh_raw_secret(const DhKeyPair& mine, const BigInt& peer_half, const DhGroup& group);

struct SessionKey {
    std::array<std::uint8_t, 16> key_bytes{};
    Sha256Digest confirmation_hash{};

    /// key = SHA-256(fixed-width secret)[0..16); confirmation = SHA-256(key ‖ "spns-kc").
    static SessionKey derive(const BigInt& raw_secret, const DhGroup& group);
    static SessionKey from_key_bytes(ByteView key16);

    friend bool operator==(const SessionKey&, const SessionKey&) = default;
};

SessionKey dh_shared_secret(const DhKeyPair& mine, const BigInt& peer_half, const DhGroup& group);

/// Constant-time equality for confirmation hashes and digests.
bool constant_time_equal(ByteView a, ByteView b);

// ---------------------------------------------------------------------------
// Layer cipher: AES-128-CTR, one continuous stream per (key, direction)
// ---------------------------------------------------------------------------

enum class Direction : std::uint8_t { forward = 0, backward = 1 };

/// Counter-mode keystream for one direction of one hop. The forward stream
/// starts at counter block 0; the backward stream starts at block 2^127, so
/// the two never overlap under the same key.
class LayerCipherState {
public:
    LayerCipherState(const SessionKey& key, Direction direction);
    LayerCipherState(const LayerCipherState& other);
    LayerCipherState(LayerCipherState&&) noexcept;
    LayerCipherState& operator=(const LayerCipherState& other);
    LayerCipherState& operator=(LayerCipherState&&) noexcept;
    ~LayerCipherState();

    /// XORs the next keystream bytes into data and advances the offset.
    void apply(std::span<std::uint8_t> data);

    Direction direction() const { return direction_; }
    std::uint64_t stream_offset() const { return offset_; }
    const std::array<std::uint8_t, 16>& key() const { return key_; }

    static std::array<std::uint8_t, 16> initial_counter(Direction direction);

private:
    std::array<std::uint8_t, 16> key_{};
    Direction direction_;
    std::uint64_t offset_ = 0;
    evp_cipher_ctx_st* ctx_ = nullptr;
};

Bytes layer_encrypt(LayerCipherState& state, ByteView plaintext);
Bytes layer_decrypt(LayerCipherState& state, ByteView ciphertext);

// ---------------------------------------------------------------------------
// Public-key material
// ---------------------------------------------------------------------------

/// Shared, immutable OpenSSL key handle.
class PKey {
public:
    PKey() = default;
    explicit PKey(evp_pkey_st* adopt);

    evp_pkey_st* get() const { return key_.get(); }
    explicit operator bool() const { return key_ != nullptr; }

private:
    std::shared_ptr<evp_pkey_st> key_;
};

/// RSA-2048 encryption public key (onion key or the core's short-term key).
class OnionPublicKey {
public:
    OnionPublicKey() = default;
    explicit OnionPublicKey(PKey key) : key_(std::move(key)) {}

    static OnionPublicKey from_der(ByteView der);
    Bytes to_der() const;
    std::size_t modulus_bytes() const;
    /// First 8 bytes of SHA-256 over the DER encoding.
    std::array<std::uint8_t, 8> fingerprint() const;

    const PKey& pkey() const { return key_; }
    friend bool operator==(const OnionPublicKey& a, const OnionPublicKey& b) { return a.to_der() == b.to_der(); }

private:
    PKey key_;
};

class OnionKeyPair {
public:
    static OnionKeyPair generate(unsigned bits = 2048);
    static OnionKeyPair from_pem(std::string_view pem);
    std::string to_pem() const;

    const OnionPublicKey& public_key() const { return public_; }
    const PKey& pkey() const { return key_; }

private:
    PKey key_;
    OnionPublicKey public_;
};

/// Ed25519 public key, 32 raw bytes.
struct IdentityPublicKey {
    std::array<std::uint8_t, 32> bytes{};

    /// Node fingerprint: first 8 bytes of SHA-256(public key).
    std::array<std::uint8_t, 8> fingerprint() const;
    friend bool operator==(const IdentityPublicKey&, const IdentityPublicKey&) = default;
};

class IdentityKeyPair {
public:
    static IdentityKeyPair generate(Rng& rng);
    static IdentityKeyPair from_seed(ByteView seed32);

    const IdentityPublicKey& public_key() const { return public_; }
    const std::array<std::uint8_t, 32>& seed() const { return seed_; }
    const PKey& pkey() const { return key_; }

private:
    std::array<std::uint8_t, 32> seed_{};
    IdentityPublicKey public_;
    PKey key_;
};

Bytes sign(const IdentityKeyPair& keypair, ByteView message);
bool verify(const IdentityPublicKey& public_key, ByteView message, ByteView signature);

// ---------------------------------------------------------------------------
// Hybrid envelope: RSA-OAEP(SHA-256) wraps a fresh AES-128 key, which
// seals the body with AES-128-GCM.
// ---------------------------------------------------------------------------

inline constexpr std::size_t kMaxEnvelopePlaintext = 64 * 1024;
inline constexpr std::size_t kGcmTagBytes = 16;

struct HybridEnvelope {
    Bytes wrapped_key;
    Bytes body_ciphertext; // GCM ciphertext ‖ tag

    std::size_t body_length() const { return body_ciphertext.size(); }

    /// u16 wrapped_key length ‖ wrapped_key ‖ u32 body length ‖ body.
    Bytes encode() const;
    /// Throws DecryptionFailure on truncation or trailing bytes.
    static HybridEnvelope decode(ByteView wire);

    friend bool operator==(const HybridEnvelope&, const HybridEnvelope&) = default;
};

HybridEnvelope hybrid_encrypt(const OnionPublicKey& recipient, ByteView plaintext, Rng& rng);
Bytes hybrid_decrypt(const OnionKeyPair& recipient, const HybridEnvelope& envelope);

/// EME-OAEP encoding (SHA-256, MGF1-SHA-256, empty label) with the seed taken
/// from rng, so seeded runs produce identical ciphertexts.
Bytes oaep_encode(ByteView message, std::size_t modulus_bytes, Rng& rng);

// ---------------------------------------------------------------------------

struct NodeKeySet {
    IdentityKeyPair identity;
    OnionKeyPair onion;
    std::uint32_t epoch = 0;

    static NodeKeySet generate(Rng& rng);
    std::array<std::uint8_t, 8> fingerprint() const { return identity.public_key().fingerprint(); }
};

} // namespace spns
