#include "capac/pa.hpp"

#include <sodium.h>

#include <cstring>
#include <mutex>

namespace capac {

std::string_view key_id_name(KeyId id) {
  switch (id) {
    case KeyId::IA: return "IA";
    case KeyId::IB: return "IB";
    case KeyId::DA: return "DA";
    case KeyId::DB: return "DB";
    case KeyId::G: return "G";
  }
  return "?";
}

KeySource KeySource::from_entropy() {
  std::random_device rd;
  const std::uint64_t seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  return KeySource(seed);
}

PaKey KeySource::make_key(KeyId id) {
  const std::uint64_t lo = rng_();
  const std::uint64_t hi = rng_();
  return PaKey(id, {lo, hi});
}

namespace {

void ensure_sodium() {
  static std::once_flag once;
  std::call_once(once, [] {
    if (sodium_init() < 0) std::abort();
  });
}

void store_le(unsigned char* out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out[i] = static_cast<unsigned char>(v >> (8 * i));
}

}  // namespace

std::uint64_t mac(const PaKey& key, std::uint64_t value, std::uint64_t modifier) {
  ensure_sodium();
  static_assert(crypto_shorthash_siphash24_KEYBYTES == 16);
  unsigned char k[16];
  store_le(k, key.material()[0]);
  store_le(k + 8, key.material()[1]);
  unsigned char msg[16];
  store_le(msg, value);
  store_le(msg + 8, modifier);
  unsigned char out[crypto_shorthash_siphash24_BYTES];
  crypto_shorthash_siphash24(out, msg, sizeof msg, k);
  std::uint64_t r = 0;
  for (int i = 7; i >= 0; --i) r = (r << 8) | out[i];
  return r;
}

namespace {

std::uint8_t pointer_pac(const PaKey& key, SignedValue64 v, std::uint64_t modifier) {
  return static_cast<std::uint8_t>(mac(key, strip_pac(v).raw(), modifier) & 0x7F);
}

}  // namespace

Result<SignedValue64> pac_sign(SignedValue64 v, const PaKey& key, std::uint64_t modifier) {
  if (v.has_pac()) {
    return Error(Errc::SignAlreadySigned, v.raw(), "PAC field already populated");
  }
  return v.with_pac(pointer_pac(key, v, modifier));
}

bool pac_verify(SignedValue64 v, const PaKey& key, std::uint64_t modifier) {
  return v.pac() == pointer_pac(key, v, modifier);
}

SignedValue64 pac_auth(SignedValue64 v, const PaKey& key, std::uint64_t modifier) {
  if (pac_verify(v, key, modifier)) return strip_pac(v);
  return SignedValue64(strip_pac(v).raw() | kCorruptionBit);
}

std::uint64_t pacga(const PaKey& key_g, std::uint64_t x, std::uint64_t y) {
  return mac(key_g, x, y);
}

}  // namespace capac
