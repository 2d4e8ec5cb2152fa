#include "semcom/crypto.hpp"

#include <sodium.h>

#include <stdexcept>

#include "semcom/errors.hpp"

namespace semcom::crypto {

namespace {

void ensure_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) throw Error("libsodium initialization failed");
}

}  // namespace

Digest sha256(std::span<const uint8_t> data) {
  ensure_sodium();
  Digest out{};
  crypto_hash_sha256(out.data(), data.data(), data.size());
  return out;
}

std::string hex(std::span<const uint8_t> data) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (uint8_t b : data) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xF]);
  }
  return out;
}

KeyPair generate_keypair(Rng& rng) {
  ensure_sodium();
  std::array<uint8_t, crypto_sign_SEEDBYTES> seed{};
  for (size_t i = 0; i < seed.size(); i += 8) {
    const uint64_t v = rng.next_u64();
    for (size_t j = 0; j < 8 && i + j < seed.size(); ++j)
      seed[i + j] = static_cast<uint8_t>(v >> (8 * j));
  }
  KeyPair kp;
  crypto_sign_seed_keypair(kp.pk.data(), kp.sk.data(), seed.data());
  return kp;
}

Signature sign(std::span<const uint8_t> message, const SecretKey& sk) {
  ensure_sodium();
  Signature sig{};
  unsigned long long len = 0;
  if (crypto_sign_detached(sig.data(), &len, message.data(), message.size(),
                           sk.data()) != 0)
    throw InvalidKeyError("signing failed");
  return sig;
}

bool verify(std::span<const uint8_t> message, std::span<const uint8_t> signature,
            const PublicKey& pk) {
  ensure_sodium();
  if (signature.size() != crypto_sign_BYTES) return false;
  return crypto_sign_verify_detached(signature.data(), message.data(),
                                     message.size(), pk.data()) == 0;
}

}  // namespace semcom::crypto
