#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "semcom/rng.hpp"

namespace semcom::crypto {

using Digest = std::array<uint8_t, 32>;
using PublicKey = std::array<uint8_t, 32>;
using SecretKey = std::array<uint8_t, 64>;
using Signature = std::array<uint8_t, 64>;

Digest sha256(std::span<const uint8_t> data);
std::string hex(std::span<const uint8_t> data);

struct KeyPair {
  PublicKey pk{};
  SecretKey sk{};
};

// Ed25519 key pair with the seed taken from the given rng, so identity
// issuance is reproducible per run seed.
KeyPair generate_keypair(Rng& rng);

// Detached Ed25519 signature (deterministic per key and message).
Signature sign(std::span<const uint8_t> message, const SecretKey& sk);
bool verify(std::span<const uint8_t> message, std::span<const uint8_t> signature,
            const PublicKey& pk);

}  // namespace semcom::crypto
