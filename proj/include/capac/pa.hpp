#pragma once

// Software model of ARMv8.3 pointer authentication.
//
// Pointers carry a 7-bit PAC in bits [54:48] and a 4-bit MTE tag in bits
// [59:56]. Bit 55 and bits [63:60] are reserved-zero. The hardware cipher is
// replaced by SipHash-2-4, a 128-bit-keyed 64-bit PRF.

#include <array>
#include <cstdint>
#include <random>
#include <string_view>

#include "capac/result.hpp"

namespace capac {

enum class KeyId : std::uint8_t { IA, IB, DA, DB, G };

std::string_view key_id_name(KeyId id);

/// A PA key. Key material never changes after construction; switching the
/// active DB key replaces which PaKey is installed, not its bytes.
class PaKey {
 public:
  PaKey(KeyId id, std::array<std::uint64_t, 2> material)
      : id_(id), material_(material) {}

  KeyId id() const { return id_; }
  const std::array<std::uint64_t, 2>& material() const { return material_; }

  /// A DA key reassigned to the DB role keeps its material.
  PaKey as_role(KeyId role) const { return PaKey(role, material_); }

  friend bool operator==(const PaKey& a, const PaKey& b) {
    return a.material_ == b.material_;
  }

 private:
  KeyId id_;
  std::array<std::uint64_t, 2> material_;
};

/// Deterministic key and secret generator. Seeded for reproducible logs.
class KeySource {
 public:
  explicit KeySource(std::uint64_t seed) : rng_(seed) {}
  static KeySource from_entropy();

  PaKey make_key(KeyId id);
  std::uint64_t next_u64() { return rng_(); }

 private:
  std::mt19937_64 rng_;
};

inline constexpr unsigned kPacShift = 48;
inline constexpr std::uint64_t kPacMask = 0x7FULL << kPacShift;
inline constexpr unsigned kTagShift = 56;
inline constexpr std::uint64_t kTagMask = 0xFULL << kTagShift;
inline constexpr std::uint64_t kPayloadMask = (1ULL << 48) - 1;
/// Written into the PAC field by a failed authentication.
inline constexpr std::uint64_t kCorruptionBit = 1ULL << 54;
/// Clears the tag nibble; the instrumenter applies it before ambient signing.
inline constexpr std::uint64_t kTagClearMask = ~kTagMask;

/// The universal pointer representation.
class SignedValue64 {
 public:
  constexpr SignedValue64() = default;
  constexpr explicit SignedValue64(std::uint64_t raw) : raw_(raw) {}

  static constexpr SignedValue64 tagged(std::uint64_t addr, std::uint8_t tag) {
    return SignedValue64((addr & kPayloadMask) |
                         (static_cast<std::uint64_t>(tag & 0xF) << kTagShift));
  }

  constexpr std::uint64_t raw() const { return raw_; }
  constexpr std::uint8_t tag() const {
    return static_cast<std::uint8_t>((raw_ & kTagMask) >> kTagShift);
  }
  constexpr std::uint8_t pac() const {
    return static_cast<std::uint8_t>((raw_ & kPacMask) >> kPacShift);
  }
  constexpr std::uint64_t payload() const { return raw_ & kPayloadMask; }
  constexpr bool has_pac() const { return (raw_ & kPacMask) != 0; }

  constexpr SignedValue64 with_tag(std::uint8_t tag) const {
    return SignedValue64((raw_ & ~kTagMask) |
                         (static_cast<std::uint64_t>(tag & 0xF) << kTagShift));
  }
  constexpr SignedValue64 with_pac(std::uint8_t pac) const {
    return SignedValue64((raw_ & ~kPacMask) |
                         (static_cast<std::uint64_t>(pac & 0x7F) << kPacShift));
  }
  constexpr SignedValue64 offset(std::int64_t delta) const {
    return SignedValue64(raw_ + static_cast<std::uint64_t>(delta));
  }

  friend constexpr bool operator==(SignedValue64, SignedValue64) = default;

 private:
  std::uint64_t raw_ = 0;
};

/// Keyed PRF over (value, modifier).
std::uint64_t mac(const PaKey& key, std::uint64_t value, std::uint64_t modifier);

/// Clears bits [54:48].
constexpr SignedValue64 strip_pac(SignedValue64 v) {
  return SignedValue64(v.raw() & ~kPacMask);
}

/// Signs v. The tag bits are part of the MAC input.
Result<SignedValue64> pac_sign(SignedValue64 v, const PaKey& key, std::uint64_t modifier);

/// Authenticates v. On mismatch the result carries the corruption pattern and
/// faults when dereferenced; authentication itself never fails.
SignedValue64 pac_auth(SignedValue64 v, const PaKey& key, std::uint64_t modifier);

/// True when pac_auth would succeed.
bool pac_verify(SignedValue64 v, const PaKey& key, std::uint64_t modifier);

/// Generic authentication: full 64-bit code, no truncation.
std::uint64_t pacga(const PaKey& key_g, std::uint64_t x, std::uint64_t y);

/// Unconditional strip without authentication.
constexpr SignedValue64 xpac(SignedValue64 v) { return strip_pac(v); }

}  // namespace capac
