#include "capac/memiso.hpp"

#include <algorithm>
#include <iterator>

namespace capac {

TaggedHeap::TaggedHeap(std::uint64_t base, std::uint64_t length)
    : base_(base), length_(round_up_granule(length)) {
  free_.emplace(base_, length_);
}

Result<void> TaggedHeap::attach(AddressSpace& mem) const { return mem.map(base_, length_); }

Result<SignedValue64> TaggedHeap::allocate(AddressSpace& mem, std::uint64_t size,
                                           std::uint8_t tag) {
  if (size == 0) return Error(Errc::OutOfMemory, "zero-sized allocation");
  const std::uint64_t need = round_up_granule(size);
  for (auto it = free_.begin(); it != free_.end(); ++it) {
    if (it->second < need) continue;
    const std::uint64_t addr = it->first;
    const std::uint64_t rest = it->second - need;
    free_.erase(it);
    if (rest > 0) free_.emplace(addr + need, rest);
    auto p = mem.tag_region(addr, need, tag);
    if (!p) return p;
    live_.emplace(addr, Allocation{addr, need, tag,
                                   std::vector<std::uint8_t>(need / kGranule, tag)});
    return p;
  }
  return Error(Errc::OutOfMemory, size, "heap pool exhausted");
}

Result<void> TaggedHeap::release(AddressSpace& mem, std::uint64_t base) {
  auto it = live_.find(base);
  if (it == live_.end()) return Error(Errc::InvalidFree, base, "not a live allocation");
  const std::uint64_t size = it->second.size;
  if (auto r = mem.stzg_region(base, size); !r) return r;
  live_.erase(it);

  auto [ins, _] = free_.emplace(base, size);
  auto next = std::next(ins);
  if (next != free_.end() && ins->first + ins->second == next->first) {
    ins->second += next->second;
    free_.erase(next);
  }
  if (ins != free_.begin()) {
    auto prev = std::prev(ins);
    if (prev->first + prev->second == ins->first) {
      prev->second += ins->second;
      free_.erase(ins);
    }
  }
  return ok();
}

const TaggedHeap::Allocation* TaggedHeap::live(std::uint64_t base) const {
  auto it = live_.find(base);
  return it == live_.end() ? nullptr : &it->second;
}

const TaggedHeap::Allocation* TaggedHeap::containing(std::uint64_t addr) const {
  auto it = live_.upper_bound(addr);
  if (it == live_.begin()) return nullptr;
  --it;
  return addr < it->first + it->second.size ? &it->second : nullptr;
}

void TaggedHeap::note_recolor(std::uint64_t addr, std::uint64_t size, std::uint8_t tag) {
  const std::uint64_t end = addr + round_up_granule(size);
  for (auto& [b, a] : live_) {
    for (std::uint64_t g = 0; g < a.granule_owner.size(); ++g) {
      const std::uint64_t ga = b + g * kGranule;
      if (ga >= addr && ga < end) a.granule_owner[g] = tag;
    }
  }
}

bool TaggedHeap::sound(const AddressSpace& mem) const {
  const TagGranuleStore* store = mem.find(base_);
  if (store == nullptr) return false;
  auto tags = store->granule_tags();
  auto bytes = store->bytes();
  const std::uint64_t first = (base_ - store->base()) / kGranule;
  std::vector<int> expect(length_ / kGranule, -1);
  for (const auto& [b, a] : live_) {
    for (std::uint64_t g = 0; g < a.granule_owner.size(); ++g) {
      expect[(b - base_) / kGranule + g] = a.granule_owner[g];
    }
  }
  for (std::uint64_t g = 0; g < expect.size(); ++g) {
    const std::uint8_t t = tags[first + g];
    if (expect[g] >= 0) {
      if (t != expect[g]) return false;
      continue;
    }
    if (t != 0) return false;
    for (std::uint64_t i = 0; i < kGranule; ++i) {
      if (bytes[(first + g) * kGranule + i] != 0) return false;
    }
  }
  return true;
}

StackArena::StackArena(std::uint64_t base, std::uint64_t length)
    : base_(base), length_(round_up_granule(length)), sp_(base + round_up_granule(length)) {}

Result<void> StackArena::attach(AddressSpace& mem) const { return mem.map(base_, length_); }

Result<std::uint64_t> StackArena::push(std::uint64_t size) {
  const std::uint64_t need = round_up_granule(size);
  if (sp_ - base_ < need) return Error(Errc::OutOfMemory, sp_, "stack overflow");
  sp_ -= need;
  return sp_;
}

void StackArena::pop(std::uint64_t size) {
  sp_ = std::min(base_ + length_, sp_ + round_up_granule(size));
}

namespace {

// DST lookup through the allocator's own scratch register: TagReg is left as
// it was unless it already held this domain's mask.
Result<std::uint8_t> trusted_tag(CpuContext& ctx, const DomainManager& dm) {
  const bool had_mask = ctx.tag_reg() != 0;
  auto mask = dm.authenticate_current_domain(ctx);
  if (!mask) return mask.error();
  if (!had_mask) dm.release_tag_mask(ctx);
  return static_cast<std::uint8_t>(*mask >> kTagShift);
}

void log_alloc(EventLog* log, unsigned dom, SignedValue64 p, std::uint64_t size) {
  if (log == nullptr) return;
  log->record(EventKind::Alloc, dom,
              {{"ptr", hex(p.raw())}, {"size", std::to_string(size)},
               {"tag", std::to_string(p.tag())}});
}

void log_free(EventLog* log, unsigned dom, SignedValue64 p) {
  if (log == nullptr) return;
  log->record(EventKind::Free, dom, {{"ptr", hex(p.raw())}, {"tag", std::to_string(p.tag())}});
}

}  // namespace

Result<SignedValue64> capac_malloc(CpuContext& ctx, const DomainManager& dm, AddressSpace& mem,
                                   TaggedHeap& heap, std::uint64_t size, EventLog* log) {
  auto tag = trusted_tag(ctx, dm);
  if (!tag) return tag.error();
  auto p = heap.allocate(mem, size, *tag);
  if (!p) return p;
  log_alloc(log, ctx.curr_dom(), *p, size);
  return p;
}

Result<void> capac_free(CpuContext& ctx, const DomainManager& dm, AddressSpace& mem,
                        TaggedHeap& heap, SignedValue64 p, EventLog* log) {
  auto tag = trusted_tag(ctx, dm);
  if (!tag) return tag.error();
  if (p.has_pac()) return Error(Errc::SegmentationOnCorruptPac, p.raw());
  const auto* block = heap.live(p.payload());
  if (block == nullptr) return Error(Errc::InvalidFree, p.raw(), "not a live allocation");
  if (p.tag() != *tag) return Error(Errc::TagMismatch, p.raw(), "block owned by another domain");
  auto g = mem.granule_tag(p.payload());
  if (!g) return g.error();
  if (*g != p.tag()) return Error(Errc::TagMismatch, p.raw(), "pointer and block disagree");
  if (auto r = heap.release(mem, p.payload()); !r) return r;
  log_free(log, ctx.curr_dom(), p);
  return ok();
}

Result<SignedValue64> ambient_malloc(AddressSpace& mem, TaggedHeap& heap, std::uint64_t size,
                                     unsigned dom, EventLog* log) {
  auto p = heap.allocate(mem, size, 0);
  if (!p) return p;
  log_alloc(log, dom, *p, size);
  return p;
}

Result<void> ambient_free(AddressSpace& mem, TaggedHeap& heap, SignedValue64 p, unsigned dom,
                          EventLog* log) {
  if (p.has_pac()) return Error(Errc::SegmentationOnCorruptPac, p.raw());
  const auto* block = heap.live(p.payload());
  if (block == nullptr) return Error(Errc::InvalidFree, p.raw(), "not a live allocation");
  if (p.tag() != 0) return Error(Errc::TagMismatch, p.raw(), "ambient free of a private block");
  auto g = mem.granule_tag(p.payload());
  if (!g) return g.error();
  if (*g != 0) return Error(Errc::TagMismatch, p.raw(), "block was recolored");
  if (auto r = heap.release(mem, p.payload()); !r) return r;
  log_free(log, dom, p);
  return ok();
}

Result<StackFrame> enter_private_frame(CpuContext& ctx, const DomainManager& dm,
                                       AddressSpace& mem, StackArena& stack, std::uint64_t size) {
  auto mask = dm.authenticate_current_domain(ctx);
  if (!mask) return mask.error();
  auto base = stack.push(size);
  if (!base) return base.error();
  const auto tag = static_cast<std::uint8_t>(*mask >> kTagShift);
  if (auto p = mem.tag_region(*base, size, tag); !p) return p.error();
  return StackFrame{*base, round_up_granule(size), 0};
}

Result<void> exit_private_frame(CpuContext& ctx, const DomainManager& dm, AddressSpace& mem,
                                StackArena& stack, const StackFrame& frame) {
  if (auto r = mem.stzg_region(frame.base, frame.size); !r) return r;
  stack.pop(frame.size);
  dm.release_tag_mask(ctx);
  return ok();
}

Result<void> capac_delegate_ptr(const CpuContext& ctx, const DomainManager& dm,
                                AddressSpace& mem, TaggedHeap* heap, SignedValue64 ptr_loc,
                                std::uint64_t size, DomainId target, std::uint64_t target_mod,
                                EventLog* log) {
  if (ctx.terminated()) return Error(Errc::ProcessTerminated);
  auto stored = mem.load_u64(ptr_loc);
  if (!stored) return stored.error();
  const SignedValue64 signed_ptr(*stored);
  const SignedValue64 p = pac_auth(signed_ptr, ctx.active_db(), ctx.mod_reg());
  if (log != nullptr) {
    log->record(EventKind::PtrAuth, ctx.curr_dom(),
                {{"key", "DB"}, {"ptr", hex(signed_ptr.raw())}, {"ok", p.has_pac() ? "0" : "1"},
                 {"site", "delegate"}});
  }
  if (p.has_pac()) return Error(Errc::PtrAuthDenied, signed_ptr.raw(), "pointer does not authenticate");
  if (p.payload() % kGranule != 0) return Error(Errc::UnalignedAddress, p.raw());
  const std::uint64_t span = round_up_granule(size);
  for (std::uint64_t off = 0; off < span; off += kGranule) {
    auto g = mem.granule_tag(p.payload() + off);
    if (!g) return g.error();
    if (*g != p.tag()) return Error(Errc::TagMismatch, p.payload() + off, "pointee tag differs");
  }
  const Domain* dom = dm.find(target);
  if (dom == nullptr) return Error(Errc::UnknownDomain, "delegation target " + std::to_string(target));

  auto recolored = mem.tag_region(p.payload(), size, dom->mte_tag);
  if (!recolored) return recolored.error();
  if (heap != nullptr) heap->note_recolor(p.payload(), size, dom->mte_tag);
  auto resigned = pac_sign(*recolored, dom->db_key, target_mod);
  if (!resigned) return resigned.error();
  if (auto w = mem.store_u64(ptr_loc, resigned->raw()); !w) return w;
  if (log != nullptr) {
    log->record(EventKind::Delegate, ctx.curr_dom(),
                {{"what", "ptr"}, {"ptr", hex(resigned->raw())}, {"size", std::to_string(size)},
                 {"to", std::to_string(target)}, {"mod", hex(target_mod)}});
    log->record(EventKind::PtrSign, ctx.curr_dom(),
                {{"key", "DB"}, {"ptr", hex(resigned->raw())}, {"site", "delegate"}});
  }
  return ok();
}

}  // namespace capac
