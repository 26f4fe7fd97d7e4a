#include "medledger/crypto.hpp"

#include <sodium.h>

#include <stdexcept>

#include "medledger/error.hpp"

namespace medledger {
namespace {

void ensure_sodium() {
    static const bool ready = [] {
        if (sodium_init() < 0) throw std::runtime_error("libsodium initialisation failed");
        return true;
    }();
    (void)ready;
}

} // namespace

PublicKey PublicKey::from_hex(std::string_view hex) {
    auto raw = medledger::from_hex(hex);
    if (raw.size() != 32) throw Error(ErrorCode::BadHex, std::string(hex), "public key must be 32 bytes");
    PublicKey k;
    std::copy(raw.begin(), raw.end(), k.bytes.begin());
    return k;
}

Signature Signature::from_hex(std::string_view hex) { return from_bytes(medledger::from_hex(hex)); }

Signature Signature::from_bytes(ByteView b) {
    if (b.size() != 64) throw Error(ErrorCode::BadHex, {}, "signature must be 64 bytes");
    Signature s;
    std::copy(b.begin(), b.end(), s.bytes.begin());
    return s;
}

PrivateKey::~PrivateKey() { sodium_memzero(sk_.data(), sk_.size()); }

std::array<std::uint8_t, 32> PrivateKey::seed() const {
    std::array<std::uint8_t, 32> s{};
    std::copy_n(sk_.begin(), 32, s.begin());
    return s;
}

KeyPair generate_key_pair(ByteView seed) {
    ensure_sodium();
    if (seed.size() != crypto_sign_SEEDBYTES)
        throw Error(ErrorCode::BadSeedLength, {}, "seed must be 32 bytes, got " + std::to_string(seed.size()));
    std::array<std::uint8_t, 32> pk{};
    std::array<std::uint8_t, 64> sk{};
    crypto_sign_seed_keypair(pk.data(), sk.data(), seed.data());
    KeyPair kp{PublicKey{pk}, PrivateKey{sk}};
    sodium_memzero(sk.data(), sk.size());
    return kp;
}

KeyPair generate_key_pair_from_hex(std::string_view seed_hex) { return generate_key_pair(from_hex(seed_hex)); }

KeyPair random_key_pair() {
    std::array<std::uint8_t, 32> seed{};
    random_bytes(seed);
    auto kp = generate_key_pair(seed);
    sodium_memzero(seed.data(), seed.size());
    return kp;
}

Signature sign(const PrivateKey& key, ByteView msg) {
    ensure_sodium();
    Signature s;
    crypto_sign_detached(s.bytes.data(), nullptr, msg.data(), msg.size(), key.raw().data());
    return s;
}

bool verify(const PublicKey& key, ByteView msg, const Signature& sig) {
    ensure_sodium();
    return crypto_sign_verify_detached(sig.bytes.data(), msg.data(), msg.size(), key.bytes.data()) == 0;
}

void random_bytes(std::span<std::uint8_t> out) {
    ensure_sodium();
    randombytes_buf(out.data(), out.size());
}

} // namespace medledger
