#include "capac/domain.hpp"

#include <algorithm>

namespace capac {

bool is_terminating(Errc code) {
  return code == Errc::EntryDenied || code == Errc::DomainAuthFailure ||
         code == Errc::ProcessTerminated;
}

std::optional<SignedValue64> DomainSignatureTable::lookup(DomainId id) const {
  if (id > kMaxDomainId || !entries_[id]) return std::nullopt;
  return SignedValue64(*entries_[id]);
}

Result<void> DomainSignatureTable::write(DomainId id, SignedValue64 value) {
  if (sealed_) return Error(Errc::AfterInitSealed, "DST is read-only");
  if (id > kMaxDomainId) return Error(Errc::UnknownDomain, "DST index out of range");
  entries_[id] = value.raw();
  return ok();
}

std::uint64_t DomainSignatureTable::digest() const {
  // FNV-1a over (present, value) pairs.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xFF;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& e : entries_) {
    mix(e ? 1 : 0);
    mix(e.value_or(0));
  }
  return h;
}

DomainManager::DomainManager(KeySource keys)
    : keys_(keys),
      ia_(keys_.make_key(KeyId::IA)),
      ib_(keys_.make_key(KeyId::IB)),
      da_(keys_.make_key(KeyId::DA)),
      g_(keys_.make_key(KeyId::G)) {}

Result<Domain> DomainManager::register_domain(std::string name, DomainId id) {
  if (sealed_) return Error(Errc::AfterInitSealed, "registration after initialization");
  if (id == kAmbient || id > kMaxDomainId) {
    return Error(Errc::UnknownDomain, "domain id must be in [1, 15]");
  }
  if (find(id) != nullptr) return Error(Errc::DuplicateId, "domain id " + std::to_string(id));
  if (!name.empty() && find(name) != nullptr) return Error(Errc::DuplicateId, "domain " + name);

  Domain dom{id, keys_.make_key(KeyId::DB), id, std::move(name)};
  // Fresh material can in principle repeat an existing key; draw again.
  while (dom.db_key == da_ ||
         std::any_of(domains_.begin(), domains_.end(),
                     [&](const Domain& d) { return d.db_key == dom.db_key; })) {
    dom.db_key = keys_.make_key(KeyId::DB);
  }
  auto sig = pac_sign(SignedValue64(id), dom.db_key, 0);
  if (!sig) return sig.error();
  dst_.entries_[id] = sig->raw();
  domains_.push_back(dom);
  return dom;
}

Result<GateHandle> DomainManager::mint_gate(DomainId target) {
  if (sealed_) return Error(Errc::AfterInitSealed, "gates are minted during initialization");
  if (find(target) == nullptr) return Error(Errc::UnknownDomain, "no domain " + std::to_string(target));
  return GateHandle(target);
}

void DomainManager::seal() {
  sealed_ = true;
  dst_.sealed_ = true;
}

CpuContext DomainManager::make_context() const { return CpuContext(ia_, ib_, da_); }

std::uint64_t DomainManager::make_entry_token(const GateHandle& gate) const {
  return pacga(g_, gate.target(), 0);
}

Result<void> DomainManager::capac_enter(CpuContext& ctx, std::uint64_t token, DomainId target,
                                        std::uint64_t modifier) const {
  if (ctx.terminated_) return Error(Errc::ProcessTerminated);
  if (ctx.in_domain_) return Error(Errc::NestedEntry, "already inside a domain");
  const Domain* dom = find(target);
  if (dom == nullptr) return Error(Errc::UnknownDomain, "no domain " + std::to_string(target));
  if (pacga(g_, target, 0) != token) {
    ctx.terminated_ = true;
    return Error(Errc::EntryDenied, token, "entry token mismatch");
  }
  ctx.active_db_ = dom->db_key;
  ctx.mod_reg_ = modifier;
  ctx.curr_dom_ = target;
  ctx.tag_reg_ = 0;
  ctx.in_domain_ = true;
  return ok();
}

Result<void> DomainManager::enter(CpuContext& ctx, const GateHandle& gate,
                                  std::uint64_t modifier) const {
  std::uint64_t token = make_entry_token(gate);
  auto r = capac_enter(ctx, token, gate.target(), modifier);
  token = 0;
  return r;
}

Result<void> DomainManager::capac_exit(CpuContext& ctx) const {
  if (ctx.terminated_) return Error(Errc::ProcessTerminated);
  if (!ctx.in_domain_) return Error(Errc::NotInDomain);
  ctx.active_db_ = da_.as_role(KeyId::DB);
  ctx.mod_reg_ = 0;
  ctx.tag_reg_ = 0;
  ctx.curr_dom_ = kAmbient;
  ctx.in_domain_ = false;
  return ok();
}

Result<std::uint64_t> DomainManager::authenticate_current_domain(CpuContext& ctx) const {
  if (ctx.terminated_) return Error(Errc::ProcessTerminated);
  const DomainId claimed = ctx.curr_dom_;
  auto sig = dst_.lookup(claimed);
  if (!sig) {
    ctx.terminated_ = true;
    return Error(Errc::DomainAuthFailure, "no domain signature for id " + std::to_string(claimed));
  }
  const SignedValue64 authed = pac_auth(*sig, ctx.active_db_, 0);
  if (authed.raw() != claimed) {
    ctx.terminated_ = true;
    return Error(Errc::DomainAuthFailure, authed.raw(),
                 "DST entry does not authenticate as domain " + std::to_string(claimed));
  }
  ctx.tag_reg_ = static_cast<std::uint64_t>(claimed) << kTagShift;
  return ctx.tag_reg_;
}

void DomainManager::release_tag_mask(CpuContext& ctx) const { ctx.tag_reg_ = 0; }

const Domain* DomainManager::find(DomainId id) const {
  for (const auto& d : domains_) {
    if (d.id == id) return &d;
  }
  return nullptr;
}

const Domain* DomainManager::find(std::string_view name) const {
  for (const auto& d : domains_) {
    if (d.name == name) return &d;
  }
  return nullptr;
}

DomainId DomainManager::active_domain(const CpuContext& ctx) const {
  for (const auto& d : domains_) {
    if (d.db_key == ctx.active_db()) return d.id;
  }
  return kAmbient;
}

const PaKey* DomainManager::signing_key(DomainId id) const {
  if (id == kAmbient) return &da_;
  const Domain* d = find(id);
  return d != nullptr ? &d->db_key : nullptr;
}

}  // namespace capac
