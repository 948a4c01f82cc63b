#include "spns/crypto.hpp"

#include <openssl/bio.h>
#include <openssl/bn.h>
#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/pem.h>
#include <openssl/rsa.h>
#include <openssl/sha.h>
#include <openssl/x509.h>

#include <cstring>

namespace spns {

namespace {

[[noreturn]] void crypto_fail(const char* what)
{
    throw Error(ErrorCode::CryptoFailure, what);
}

struct BnCtx {
    BN_CTX* ctx = BN_CTX_new();
    BnCtx() { if (!ctx) crypto_fail("BN_CTX_new"); }
    ~BnCtx() { BN_CTX_free(ctx); }
    BnCtx(const BnCtx&) = delete;
    BnCtx& operator=(const BnCtx&) = delete;
};

struct PKeyCtx {
    EVP_PKEY_CTX* ctx;
    explicit PKeyCtx(EVP_PKEY* key) : ctx(EVP_PKEY_CTX_new(key, nullptr)) { if (!ctx) crypto_fail("EVP_PKEY_CTX_new"); }
    ~PKeyCtx() { EVP_PKEY_CTX_free(ctx); }
    PKeyCtx(const PKeyCtx&) = delete;
    PKeyCtx& operator=(const PKeyCtx&) = delete;
};

struct CipherCtx {
    EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
    CipherCtx() { if (!ctx) crypto_fail("EVP_CIPHER_CTX_new"); }
    ~CipherCtx() { EVP_CIPHER_CTX_free(ctx); }
    CipherCtx(const CipherCtx&) = delete;
    CipherCtx& operator=(const CipherCtx&) = delete;
};

struct MdCtx {
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    MdCtx() { if (!ctx) crypto_fail("EVP_MD_CTX_new"); }
    ~MdCtx() { EVP_MD_CTX_free(ctx); }
    MdCtx(const MdCtx&) = delete;
    MdCtx& operator=(const MdCtx&) = delete;
};

struct Bio {
    BIO* bio;
    Bio() : bio(BIO_new(BIO_s_mem())) { if (!bio) crypto_fail("BIO_new"); }
    explicit Bio(std::string_view data) : bio(BIO_new_mem_buf(data.data(), static_cast<int>(data.size()))) { if (!bio) crypto_fail("BIO_new_mem_buf"); }
    ~Bio() { BIO_free(bio); }
    Bio(const Bio&) = delete;
    Bio& operator=(const Bio&) = delete;
};

} // namespace

Sha256Digest sha256(ByteView data)
{
    Sha256Digest out{};
    SHA256(data.data(), data.size(), out.data());
    return out;
}

Sha256Digest sha256(std::initializer_list<ByteView> parts)
{
    MdCtx md;
    if (EVP_DigestInit_ex(md.ctx, EVP_sha256(), nullptr) != 1) crypto_fail("EVP_DigestInit_ex");
    for (auto p : parts) EVP_DigestUpdate(md.ctx, p.data(), p.size());
    Sha256Digest out{};
    if (EVP_DigestFinal_ex(md.ctx, out.data(), nullptr) != 1) crypto_fail("EVP_DigestFinal_ex");
    return out;
}

bool constant_time_equal(ByteView a, ByteView b)
{
    if (a.size() != b.size()) return false;
    return CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

// ---------------------------------------------------------------------------
// BigInt

BigInt::BigInt() : bn_(BN_new())
{
    if (!bn_) crypto_fail("BN_new");
}

BigInt::BigInt(std::uint64_t v) : BigInt()
{
    std::array<std::uint8_t, 8> b{};
    for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(v >> (56 - 8 * i));
    BN_bin2bn(b.data(), 8, bn_);
}

BigInt::BigInt(const BigInt& other) : bn_(BN_dup(other.bn_))
{
    if (!bn_) crypto_fail("BN_dup");
}

BigInt::BigInt(BigInt&& other) noexcept : bn_(other.bn_)
{
    other.bn_ = nullptr;
}

BigInt& BigInt::operator=(const BigInt& other)
{
    if (this != &other) {
        BigInt copy(other);
        std::swap(bn_, copy.bn_);
    }
    return *this;
}

BigInt& BigInt::operator=(BigInt&& other) noexcept
{
    std::swap(bn_, other.bn_);
    return *this;
}

BigInt::~BigInt()
{
    BN_clear_free(bn_);
}

BigInt BigInt::from_bytes(ByteView big_endian)
{
    BigInt out;
    if (!BN_bin2bn(big_endian.data(), static_cast<int>(big_endian.size()), out.bn_)) crypto_fail("BN_bin2bn");
    return out;
}

BigInt BigInt::from_hex(std::string_view hex)
{
    return from_bytes(spns::from_hex(hex.size() % 2 ? "0" + std::string(hex) : std::string(hex)));
}

Bytes BigInt::to_bytes(std::size_t width) const
{
    if (num_bytes() > width) throw Error(ErrorCode::InvalidArgument, "integer wider than encoding");
    Bytes out(width);
    if (BN_bn2binpad(bn_, out.data(), static_cast<int>(width)) < 0) crypto_fail("BN_bn2binpad");
    return out;
}

std::size_t BigInt::num_bytes() const { return static_cast<std::size_t>(BN_num_bytes(bn_)); }
std::size_t BigInt::num_bits() const { return static_cast<std::size_t>(BN_num_bits(bn_)); }

std::uint64_t BigInt::to_u64() const
{
    if (num_bytes() > 8) throw Error(ErrorCode::InvalidArgument, "integer exceeds 64 bits");
    std::uint64_t v = 0;
    for (auto b : to_bytes(8)) v = (v << 8) | b;
    return v;
}

BigInt BigInt::mod_exp(const BigInt& exponent, const BigInt& modulus) const
{
    BnCtx ctx;
    BigInt out;
    int ok = BN_is_odd(modulus.bn_)
        ? BN_mod_exp_mont_consttime(out.bn_, bn_, exponent.bn_, modulus.bn_, ctx.ctx, nullptr)
        : BN_mod_exp(out.bn_, bn_, exponent.bn_, modulus.bn_, ctx.ctx);
    if (!ok) crypto_fail("BN_mod_exp");
    return out;
}

BigInt BigInt::operator-(std::uint64_t v) const
{
    BigInt out(*this);
    if (!BN_sub(out.bn_, bn_, BigInt(v).bn_)) crypto_fail("BN_sub");
    return out;
}

int BigInt::compare(const BigInt& other) const
{
    return BN_cmp(bn_, other.bn_);
}

bool BigInt::is_probable_prime() const
{
    BnCtx ctx;
    int r = BN_check_prime(bn_, ctx.ctx, nullptr);
    if (r < 0) crypto_fail("BN_check_prime");
    return r == 1;
}

// ---------------------------------------------------------------------------
// Diffie-Hellman

DhGroup::DhGroup(BigInt prime, BigInt generator) : p_(std::move(prime)), g_(std::move(generator))
{
    if (!p_.is_probable_prime()) throw Error(ErrorCode::InvalidArgument, "DH modulus is not prime");
    if (g_ <= BigInt(1) || !(g_ < p_)) throw Error(ErrorCode::InvalidArgument, "DH generator out of range");
}

DhGroup::DhGroup(BigInt prime, BigInt generator, Trusted) : p_(std::move(prime)), g_(std::move(generator)) {}

const DhGroup& DhGroup::modp2048()
{
    static const DhGroup group = [] {
        BIGNUM* raw = BN_get_rfc3526_prime_2048(nullptr);
        if (!raw) crypto_fail("BN_get_rfc3526_prime_2048");
        Bytes encoded(static_cast<std::size_t>(BN_num_bytes(raw)));
        BN_bn2bin(raw, encoded.data());
        BN_free(raw);
        return DhGroup(BigInt::from_bytes(encoded), BigInt(2), Trusted{});
    }();
    return group;
}

bool dh_is_degenerate(const DhGroup& group, const BigInt& half)
{
    const auto& p = group.prime();
    if (!(half < p)) return true;
    return half == BigInt(0) || half == BigInt(1) || half == p - 1;
}

DhKeyPair dh_keypair_from_secret(const DhGroup& group, const BigInt& secret)
{
    if (secret < BigInt(1) || group.prime() - 2 < secret)
        throw Error(ErrorCode::InvalidArgument, "DH exponent out of range");
    return DhKeyPair{secret, group.generator().mod_exp(secret, group.prime())};
}

DhKeyPair dh_generate(const DhGroup& group, Rng& rng)
{
    const auto& p = group.prime();
    const std::size_t width = p.num_bytes();
    const std::size_t excess_bits = width * 8 - p.num_bits();
    const BigInt upper = p - 2;
    for (;;) {
        Bytes draw = rng.bytes(width);
        draw[0] &= static_cast<std::uint8_t>(0xff >> excess_bits);
        BigInt x = BigInt::from_bytes(draw);
        if (x < BigInt(2) || upper < x) continue;
        DhKeyPair kp{x, group.generator().mod_exp(x, p)};
        if (!dh_is_degenerate(group, kp.public_half)) return kp;
    }
}

BigInt dh_raw_secret(const DhKeyPair& mine, const BigInt& peer_half, const DhGroup& group)
{
    if (dh_is_degenerate(group, peer_half)) throw Error(ErrorCode::DegenerateHalfKey, "peer half-key is degenerate");
    return peer_half.mod_exp(mine.secret, group.prime());
}

SessionKey SessionKey::derive(const BigInt& raw_secret, const DhGroup& group)
{
    auto encoded = raw_secret.to_bytes(group.element_bytes());
    auto digest = sha256(encoded);
    OPENSSL_cleanse(encoded.data(), encoded.size());
    return from_key_bytes(ByteView(digest).first(16));
}

SessionKey SessionKey::from_key_bytes(ByteView key16)
{
    if (key16.size() != 16) throw Error(ErrorCode::InvalidArgument, "session key must be 16 bytes");
    SessionKey k;
    std::copy(key16.begin(), key16.end(), k.key_bytes.begin());
    static constexpr std::string_view label = "spns-kc";
    k.confirmation_hash = sha256({ByteView(k.key_bytes), ByteView(reinterpret_cast<const std::uint8_t*>(label.data()), label.size())});
    return k;
}

SessionKey dh_shared_secret(const DhKeyPair& mine, const BigInt& peer_half, const DhGroup& group)
{
    return SessionKey::derive(dh_raw_secret(mine, peer_half, group), group);
}

// ---------------------------------------------------------------------------
// LayerCipherState

std::array<std::uint8_t, 16> LayerCipherState::initial_counter(Direction direction)
{
    std::array<std::uint8_t, 16> iv{};
    if (direction == Direction::backward) iv[0] = 0x80;
    return iv;
}

LayerCipherState::LayerCipherState(const SessionKey& key, Direction direction)
    : key_(key.key_bytes), direction_(direction), ctx_(EVP_CIPHER_CTX_new())
{
    if (!ctx_) crypto_fail("EVP_CIPHER_CTX_new");
    auto iv = initial_counter(direction);
    if (EVP_EncryptInit_ex(ctx_, EVP_aes_128_ctr(), nullptr, key_.data(), iv.data()) != 1)
        crypto_fail("EVP_EncryptInit_ex(aes-128-ctr)");
}

LayerCipherState::LayerCipherState(const LayerCipherState& other)
    : key_(other.key_), direction_(other.direction_), offset_(other.offset_), ctx_(EVP_CIPHER_CTX_new())
{
    if (!ctx_ || EVP_CIPHER_CTX_copy(ctx_, other.ctx_) != 1) crypto_fail("EVP_CIPHER_CTX_copy");
}

LayerCipherState::LayerCipherState(LayerCipherState&& other) noexcept
    : key_(other.key_), direction_(other.direction_), offset_(other.offset_), ctx_(other.ctx_)
{
    other.ctx_ = nullptr;
}

LayerCipherState& LayerCipherState::operator=(const LayerCipherState& other)
{
    if (this != &other) {
        LayerCipherState copy(other);
        *this = std::move(copy);
    }
    return *this;
}

LayerCipherState& LayerCipherState::operator=(LayerCipherState&& other) noexcept
{
    std::swap(key_, other.key_);
    std::swap(direction_, other.direction_);
    std::swap(offset_, other.offset_);
    std::swap(ctx_, other.ctx_);
    return *this;
}

LayerCipherState::~LayerCipherState()
{
    EVP_CIPHER_CTX_free(ctx_);
    OPENSSL_cleanse(key_.data(), key_.size());
}

void LayerCipherState::apply(std::span<std::uint8_t> data)
{
    if (data.empty()) return;
    int out_len = 0;
    if (EVP_EncryptUpdate(ctx_, data.data(), &out_len, data.data(), static_cast<int>(data.size())) != 1 ||
        static_cast<std::size_t>(out_len) != data.size())
        crypto_fail("EVP_EncryptUpdate(aes-128-ctr)");
    offset_ += data.size();
}

Bytes layer_encrypt(LayerCipherState& state, ByteView plaintext)
{
    Bytes out(plaintext.begin(), plaintext.end());
    state.apply(out);
    return out;
}

Bytes layer_decrypt(LayerCipherState& state, ByteView ciphertext)
{
    return layer_encrypt(state, ciphertext);
}

// ---------------------------------------------------------------------------
// Keys

PKey::PKey(EVP_PKEY* adopt) : key_(adopt, EVP_PKEY_free)
{
    if (!adopt) crypto_fail("null EVP_PKEY");
}

OnionPublicKey OnionPublicKey::from_der(ByteView der)
{
    const unsigned char* p = der.data();
    EVP_PKEY* key = d2i_PUBKEY(nullptr, &p, static_cast<long>(der.size()));
    if (!key) throw Error(ErrorCode::Malformed, "invalid public key DER");
    PKey owned(key);
    if (!EVP_PKEY_is_a(key, "RSA") || p != der.data() + der.size())
        throw Error(ErrorCode::Malformed, "onion key must be a bare RSA public key");
    return OnionPublicKey(std::move(owned));
}

Bytes OnionPublicKey::to_der() const
{
    if (!key_) return {};
    int len = i2d_PUBKEY(key_.get(), nullptr);
    if (len <= 0) crypto_fail("i2d_PUBKEY");
    Bytes out(static_cast<std::size_t>(len));
    unsigned char* p = out.data();
    i2d_PUBKEY(key_.get(), &p);
    return out;
}

std::size_t OnionPublicKey::modulus_bytes() const
{
    return static_cast<std::size_t>(EVP_PKEY_get_size(key_.get()));
}

std::array<std::uint8_t, 8> OnionPublicKey::fingerprint() const
{
    auto d = sha256(to_der());
    std::array<std::uint8_t, 8> out{};
    std::copy_n(d.begin(), 8, out.begin());
    return out;
}

namespace {

OnionPublicKey public_half_of(const PKey& key)
{
    int len = i2d_PUBKEY(key.get(), nullptr);
    if (len <= 0) crypto_fail("i2d_PUBKEY");
    Bytes der(static_cast<std::size_t>(len));
    unsigned char* p = der.data();
    i2d_PUBKEY(key.get(), &p);
    return OnionPublicKey::from_der(der);
}

} // namespace

OnionKeyPair OnionKeyPair::generate(unsigned bits)
{
    OnionKeyPair kp;
    kp.key_ = PKey(EVP_RSA_gen(bits));
    kp.public_ = public_half_of(kp.key_);
    return kp;
}

OnionKeyPair OnionKeyPair::from_pem(std::string_view pem)
{
    Bio bio(pem);
    EVP_PKEY* key = PEM_read_bio_PrivateKey(bio.bio, nullptr, nullptr, nullptr);
    if (!key) throw Error(ErrorCode::Malformed, "invalid private key PEM");
    OnionKeyPair kp;
    kp.key_ = PKey(key);
    if (!EVP_PKEY_is_a(key, "RSA")) throw Error(ErrorCode::Malformed, "onion key must be RSA");
    kp.public_ = public_half_of(kp.key_);
    return kp;
}

std::string OnionKeyPair::to_pem() const
{
    Bio bio;
    if (PEM_write_bio_PrivateKey(bio.bio, key_.get(), nullptr, nullptr, 0, nullptr, nullptr) != 1)
        crypto_fail("PEM_write_bio_PrivateKey");
    char* data = nullptr;
    long len = BIO_get_mem_data(bio.bio, &data);
    return std::string(data, static_cast<std::size_t>(len));
}

std::array<std::uint8_t, 8> IdentityPublicKey::fingerprint() const
{
    auto d = sha256(bytes);
    std::array<std::uint8_t, 8> out{};
    std::copy_n(d.begin(), 8, out.begin());
    return out;
}

IdentityKeyPair IdentityKeyPair::generate(Rng& rng)
{
    std::array<std::uint8_t, 32> seed{};
    rng.fill(seed);
    return from_seed(seed);
}

IdentityKeyPair IdentityKeyPair::from_seed(ByteView seed32)
{
    if (seed32.size() != 32) throw Error(ErrorCode::InvalidArgument, "Ed25519 seed must be 32 bytes");
    IdentityKeyPair kp;
    std::copy(seed32.begin(), seed32.end(), kp.seed_.begin());
    kp.key_ = PKey(EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr, seed32.data(), 32));
    std::size_t len = 32;
    if (EVP_PKEY_get_raw_public_key(kp.key_.get(), kp.public_.bytes.data(), &len) != 1 || len != 32)
        crypto_fail("EVP_PKEY_get_raw_public_key");
    return kp;
}

Bytes sign(const IdentityKeyPair& keypair, ByteView message)
{
    MdCtx md;
    if (EVP_DigestSignInit(md.ctx, nullptr, nullptr, nullptr, keypair.pkey().get()) != 1) crypto_fail("EVP_DigestSignInit");
    std::size_t len = 64;
    Bytes sig(len);
    if (EVP_DigestSign(md.ctx, sig.data(), &len, message.data(), message.size()) != 1) crypto_fail("EVP_DigestSign");
    sig.resize(len);
    return sig;
}

bool verify(const IdentityPublicKey& public_key, ByteView message, ByteView signature)
{
    EVP_PKEY* raw = EVP_PKEY_new_raw_public_key(EVP_PKEY_ED25519, nullptr, public_key.bytes.data(), 32);
    if (!raw) return false;
    PKey key(raw);
    MdCtx md;
    if (EVP_DigestVerifyInit(md.ctx, nullptr, nullptr, nullptr, key.get()) != 1) return false;
    return EVP_DigestVerify(md.ctx, signature.data(), signature.size(), message.data(), message.size()) == 1;
}

NodeKeySet NodeKeySet::generate(Rng& rng)
{
    return NodeKeySet{IdentityKeyPair::generate(rng), OnionKeyPair::generate(), 0};
}

// ---------------------------------------------------------------------------
// Hybrid envelope

namespace {

void mgf1_xor(std::span<std::uint8_t> out, ByteView seed)
{
    std::size_t done = 0;
    for (std::uint32_t counter = 0; done < out.size(); ++counter) {
        std::array<std::uint8_t, 4> c{};
        put_u32(c, counter);
        auto block = sha256({seed, ByteView(c)});
        for (std::size_t i = 0; i < block.size() && done < out.size(); ++i) out[done++] ^= block[i];
    }
}

constexpr std::size_t kEphemeralKeyBytes = 16;
constexpr std::array<std::uint8_t, 12> kGcmNonce{};

} // namespace

Bytes oaep_encode(ByteView message, std::size_t k, Rng& rng)
{
    constexpr std::size_t h = 32;
    if (k < 2 * h + 2 || message.size() > k - 2 * h - 2)
        throw Error(ErrorCode::InvalidArgument, "message too long for OAEP");
    const auto label_hash = sha256(ByteView{});
    Bytes em(k, 0);
    auto seed = std::span(em).subspan(1, h);
    auto db = std::span(em).subspan(1 + h);
    std::copy(label_hash.begin(), label_hash.end(), db.begin());
    db[db.size() - message.size() - 1] = 0x01;
    std::copy(message.begin(), message.end(), db.end() - static_cast<std::ptrdiff_t>(message.size()));
    rng.fill(seed);
    mgf1_xor(db, seed);
    mgf1_xor(seed, db);
    return em;
}

Bytes HybridEnvelope::encode() const
{
    ByteWriter w(2 + wrapped_key.size() + 4 + body_ciphertext.size());
    w.u16(static_cast<std::uint16_t>(wrapped_key.size()));
    w.raw(wrapped_key);
    w.u32(static_cast<std::uint32_t>(body_ciphertext.size()));
    w.raw(body_ciphertext);
    return std::move(w).take();
}

HybridEnvelope HybridEnvelope::decode(ByteView wire)
{
    try {
        ByteReader r(wire);
        HybridEnvelope env;
        auto wlen = r.u16();
        auto w = r.raw(wlen);
        env.wrapped_key.assign(w.begin(), w.end());
        auto blen = r.u32();
        auto b = r.raw(blen);
        env.body_ciphertext.assign(b.begin(), b.end());
        if (!r.empty()) throw Error(ErrorCode::Malformed, "trailing bytes");
        return env;
    } catch (const Error& e) {
        throw Error(ErrorCode::DecryptionFailure, std::string("envelope framing: ") + e.what());
    }
}

HybridEnvelope hybrid_encrypt(const OnionPublicKey& recipient, ByteView plaintext, Rng& rng)
{
    if (plaintext.size() > kMaxEnvelopePlaintext) throw Error(ErrorCode::InvalidArgument, "envelope plaintext exceeds 64 KiB");
    std::array<std::uint8_t, kEphemeralKeyBytes> ephemeral{};
    rng.fill(ephemeral);

    HybridEnvelope env;
    const std::size_t k = recipient.modulus_bytes();
    Bytes em = oaep_encode(ephemeral, k, rng);
    {
        PKeyCtx ctx(recipient.pkey().get());
        if (EVP_PKEY_encrypt_init(ctx.ctx) != 1 || EVP_PKEY_CTX_set_rsa_padding(ctx.ctx, RSA_NO_PADDING) != 1)
            crypto_fail("EVP_PKEY_encrypt_init");
        std::size_t out_len = k;
        env.wrapped_key.resize(k);
        if (EVP_PKEY_encrypt(ctx.ctx, env.wrapped_key.data(), &out_len, em.data(), em.size()) != 1)
            crypto_fail("EVP_PKEY_encrypt");
        env.wrapped_key.resize(out_len);
    }

    CipherCtx c;
    env.body_ciphertext.resize(plaintext.size() + kGcmTagBytes);
    int len = 0;
    if (EVP_EncryptInit_ex(c.ctx, EVP_aes_128_gcm(), nullptr, ephemeral.data(), kGcmNonce.data()) != 1 ||
        EVP_EncryptUpdate(c.ctx, env.body_ciphertext.data(), &len, plaintext.data(), static_cast<int>(plaintext.size())) != 1 ||
        EVP_EncryptFinal_ex(c.ctx, env.body_ciphertext.data() + len, &len) != 1 ||
        EVP_CIPHER_CTX_ctrl(c.ctx, EVP_CTRL_GCM_GET_TAG, kGcmTagBytes, env.body_ciphertext.data() + plaintext.size()) != 1)
        crypto_fail("aes-128-gcm seal");
    OPENSSL_cleanse(ephemeral.data(), ephemeral.size());
    return env;
}

Bytes hybrid_decrypt(const OnionKeyPair& recipient, const HybridEnvelope& envelope)
{
    std::array<std::uint8_t, 512> key_buf{};
    std::size_t key_len = key_buf.size();
    {
        PKeyCtx ctx(recipient.pkey().get());
        if (EVP_PKEY_decrypt_init(ctx.ctx) != 1 ||
            EVP_PKEY_CTX_set_rsa_padding(ctx.ctx, RSA_PKCS1_OAEP_PADDING) != 1 ||
            EVP_PKEY_CTX_set_rsa_oaep_md(ctx.ctx, EVP_sha256()) != 1 ||
            EVP_PKEY_CTX_set_rsa_mgf1_md(ctx.ctx, EVP_sha256()) != 1)
            crypto_fail("EVP_PKEY_decrypt_init");
        if (envelope.wrapped_key.size() != recipient.public_key().modulus_bytes() ||
            EVP_PKEY_decrypt(ctx.ctx, key_buf.data(), &key_len, envelope.wrapped_key.data(), envelope.wrapped_key.size()) != 1)
            throw Error(ErrorCode::DecryptionFailure, "key unwrap failed");
    }
    if (key_len != kEphemeralKeyBytes) throw Error(ErrorCode::DecryptionFailure, "unexpected wrapped key length");
    if (envelope.body_ciphertext.size() < kGcmTagBytes) throw Error(ErrorCode::DecryptionFailure, "body shorter than tag");

    const std::size_t n = envelope.body_ciphertext.size() - kGcmTagBytes;
    Bytes plain(n);
    CipherCtx c;
    int len = 0;
    Bytes tag(envelope.body_ciphertext.end() - kGcmTagBytes, envelope.body_ciphertext.end());
    bool ok = EVP_DecryptInit_ex(c.ctx, EVP_aes_128_gcm(), nullptr, key_buf.data(), kGcmNonce.data()) == 1 &&
              EVP_DecryptUpdate(c.ctx, plain.data(), &len, envelope.body_ciphertext.data(), static_cast<int>(n)) == 1 &&
              EVP_CIPHER_CTX_ctrl(c.ctx, EVP_CTRL_GCM_SET_TAG, kGcmTagBytes, tag.data()) == 1 &&
              EVP_DecryptFinal_ex(c.ctx, plain.data() + len, &len) == 1;
    OPENSSL_cleanse(key_buf.data(), key_buf.size());
    if (!ok) throw Error(ErrorCode::DecryptionFailure, "body authentication failed");
    return plain;
}

} // namespace spns
