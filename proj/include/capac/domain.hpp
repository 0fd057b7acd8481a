#pragma once

// Domain registry, key switching, authenticated entry gates and the Domain
// Signature Table.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "capac/pa.hpp"
#include "capac/result.hpp"

namespace capac {

using DomainId = std::uint8_t;
inline constexpr DomainId kAmbient = 0;
inline constexpr DomainId kMaxDomainId = 15;

struct Domain {
  DomainId id;
  PaKey db_key;
  std::uint8_t mte_tag;
  std::string name;
};

/// DST[i] = pac_sign(i, DB_i, 0). Read-only once sealed.
class DomainSignatureTable {
 public:
  std::optional<SignedValue64> lookup(DomainId id) const;
  /// Raw write into the table. Only accepted before the seal.
  Result<void> write(DomainId id, SignedValue64 value);
  bool sealed() const { return sealed_; }
  std::uint64_t digest() const;

 private:
  friend class DomainManager;
  std::array<std::optional<std::uint64_t>, kMaxDomainId + 1> entries_{};
  bool sealed_ = false;
};

/// Per-thread CPU state: installed keys and the reserved registers.
///
/// mod_reg and tag_reg have no public mutators; only DomainManager writes them.
/// curr_dom is an ordinary global in process memory and can be overwritten.
class CpuContext {
 public:
  const PaKey& active_db() const { return active_db_; }
  const PaKey& active_da() const { return da_; }
  const PaKey& ia() const { return ia_; }
  const PaKey& ib() const { return ib_; }
  std::uint64_t mod_reg() const { return mod_reg_; }
  std::uint64_t tag_reg() const { return tag_reg_; }
  DomainId curr_dom() const { return curr_dom_; }
  bool in_domain() const { return in_domain_; }
  bool terminated() const { return terminated_; }

  /// Memory-corruption primitive on the `curr_dom` global.
  void overwrite_curr_dom(DomainId id) { curr_dom_ = id; }

  friend bool operator==(const CpuContext&, const CpuContext&) = default;

 private:
  friend class DomainManager;
  CpuContext(PaKey ia, PaKey ib, PaKey da)
      : active_db_(da.as_role(KeyId::DB)), da_(da), ia_(ia), ib_(ib) {}

  PaKey active_db_;
  PaKey da_;
  PaKey ia_;
  PaKey ib_;
  std::uint64_t mod_reg_ = 0;
  std::uint64_t tag_reg_ = 0;
  DomainId curr_dom_ = kAmbient;
  bool in_domain_ = false;
  bool terminated_ = false;
};

/// Capability to construct entry tokens for one domain. Minted only during
/// initialization; arbitrary code holds no GateHandle and so cannot run pacga.
class GateHandle {
 public:
  DomainId target() const { return target_; }

 private:
  friend class DomainManager;
  explicit GateHandle(DomainId target) : target_(target) {}
  DomainId target_;
};

class DomainManager {
 public:
  explicit DomainManager(KeySource keys);

  Result<Domain> register_domain(std::string name, DomainId id);
  Result<GateHandle> mint_gate(DomainId target);
  /// Ends the initialization phase. DST and registry become read-only.
  void seal();
  bool sealed() const { return sealed_; }

  CpuContext make_context() const;

  std::uint64_t make_entry_token(const GateHandle& gate) const;

  /// Kernel side of the gate: recompute the token and switch keys.
  /// A token mismatch terminates the process.
  Result<void> capac_enter(CpuContext& ctx, std::uint64_t token, DomainId target,
                           std::uint64_t modifier) const;
  /// The inlined call gate: token construction followed by capac_enter.
  Result<void> enter(CpuContext& ctx, const GateHandle& gate, std::uint64_t modifier) const;
  Result<void> capac_exit(CpuContext& ctx) const;

  /// DST-based retrieval of the current domain's tag. Loads TagReg on success;
  /// failure terminates the process.
  Result<std::uint64_t> authenticate_current_domain(CpuContext& ctx) const;
  /// Stack-frame epilogue: `fmov TagReg, xzr`.
  void release_tag_mask(CpuContext& ctx) const;

  const DomainSignatureTable& dst() const { return dst_; }
  DomainSignatureTable& dst() { return dst_; }

  const Domain* find(DomainId id) const;
  const Domain* find(std::string_view name) const;
  const std::vector<Domain>& domains() const { return domains_; }

  /// The domain whose DB key is installed, or ambient. Kernel-side knowledge.
  DomainId active_domain(const CpuContext& ctx) const;

  const PaKey& da() const { return da_; }
  const PaKey& g() const { return g_; }
  /// DB key of a domain or DA for the ambient domain.
  const PaKey* signing_key(DomainId id) const;

 private:
  KeySource keys_;
  PaKey ia_;
  PaKey ib_;
  PaKey da_;
  PaKey g_;
  std::vector<Domain> domains_;
  DomainSignatureTable dst_;
  bool sealed_ = false;
};

/// Processes terminated by a failed gate or failed domain authentication.
bool is_terminating(Errc code);

}  // namespace capac
