#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

#include "medledger/codec.hpp"

namespace medledger {

// Ed25519 (RFC 8032). Signing is deterministic.

struct PublicKey {
    std::array<std::uint8_t, 32> bytes{};

    std::string hex() const { return to_hex(bytes); }
    static PublicKey from_hex(std::string_view hex);
    auto operator<=>(const PublicKey&) const = default;
};

struct Signature {
    std::array<std::uint8_t, 64> bytes{};

    std::string hex() const { return to_hex(bytes); }
    static Signature from_hex(std::string_view hex);
    static Signature from_bytes(ByteView b);
    auto operator<=>(const Signature&) const = default;
};

// libsodium's 64-byte secret key (seed || public key). Never encoded into
// Documents; only the seed is exported, as hex, by the keygen tool.
class PrivateKey {
public:
    PrivateKey() = default;
    explicit PrivateKey(const std::array<std::uint8_t, 64>& sk) : sk_(sk) {}
    ~PrivateKey();
    PrivateKey(const PrivateKey&) = default;
    PrivateKey& operator=(const PrivateKey&) = default;

    const std::array<std::uint8_t, 64>& raw() const { return sk_; }
    std::array<std::uint8_t, 32> seed() const;
    bool operator==(const PrivateKey&) const = default;

private:
    std::array<std::uint8_t, 64> sk_{};
};

struct KeyPair {
    PublicKey public_key;
    PrivateKey private_key;
};

KeyPair generate_key_pair(ByteView seed);
KeyPair generate_key_pair_from_hex(std::string_view seed_hex);
KeyPair random_key_pair();

Signature sign(const PrivateKey& key, ByteView msg);
bool verify(const PublicKey& key, ByteView msg, const Signature& sig);

// Fills `out` with OS randomness.
void random_bytes(std::span<std::uint8_t> out);

} // namespace medledger
