#include "capac/memory.hpp"

#include <algorithm>
#include <cstdio>
#include <utility>

namespace capac {

namespace {

// Bits that must be clear in a dereferenceable pointer besides the tag.
constexpr std::uint64_t kNonCanonicalMask = kPacMask | (1ULL << 55) | (0xFULL << 60);

}  // namespace

TagGranuleStore::TagGranuleStore(std::uint64_t base, std::uint64_t length)
    : base_(base),
      length_(round_up_granule(length)),
      tags_(length_ / kGranule, 0),
      bytes_(length_, 0) {}

Result<void> TagGranuleStore::check_range(std::uint64_t addr, std::uint64_t size) const {
  if (!contains(addr, size)) {
    return Error(Errc::OutOfBounds, addr, "range leaves mapped region");
  }
  return ok();
}

Result<SignedValue64> TagGranuleStore::tag_region(std::uint64_t addr, std::uint64_t size,
                                                  std::uint8_t tag) {
  if (addr % kGranule != 0) return Error(Errc::UnalignedAddress, addr);
  const std::uint64_t span = round_up_granule(size);
  if (auto r = check_range(addr, span); !r) return r.error();
  for (std::uint64_t a = addr; a < addr + span; a += kGranule) {
    tags_[(a - base_) / kGranule] = tag & 0xF;
  }
  return SignedValue64::tagged(addr, tag);
}

Result<void> TagGranuleStore::stzg_region(std::uint64_t addr, std::uint64_t size) {
  if (addr % kGranule != 0) return Error(Errc::UnalignedAddress, addr);
  const std::uint64_t span = round_up_granule(size);
  if (auto r = check_range(addr, span); !r) return r;
  for (std::uint64_t a = addr; a < addr + span; a += kGranule) {
    tags_[(a - base_) / kGranule] = 0;
  }
  std::fill(bytes_.begin() + static_cast<std::ptrdiff_t>(addr - base_),
            bytes_.begin() + static_cast<std::ptrdiff_t>(addr - base_ + span), 0);
  return ok();
}

Result<void> TagGranuleStore::check_tags(SignedValue64 p, std::uint64_t width) const {
  const std::uint64_t addr = p.payload();
  if (auto r = check_range(addr, width); !r) return r;
  if (width == 0) return ok();
  const std::uint64_t first = (addr - base_) / kGranule;
  const std::uint64_t last = (addr + width - 1 - base_) / kGranule;
  for (std::uint64_t g = first; g <= last; ++g) {
    if (tags_[g] != p.tag()) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "pointer tag %u, granule tag %u", p.tag(), tags_[g]);
      return Error(Errc::TagMismatch, base_ + g * kGranule, buf);
    }
  }
  return ok();
}

Result<std::vector<std::uint8_t>> TagGranuleStore::load(SignedValue64 p,
                                                        std::uint64_t width) const {
  if (auto r = check_tags(p, width); !r) return r.error();
  const auto off = static_cast<std::ptrdiff_t>(p.payload() - base_);
  return std::vector<std::uint8_t>(bytes_.begin() + off,
                                   bytes_.begin() + off + static_cast<std::ptrdiff_t>(width));
}

Result<void> TagGranuleStore::store(SignedValue64 p, std::span<const std::uint8_t> bytes) {
  if (auto r = check_tags(p, bytes.size()); !r) return r;
  std::copy(bytes.begin(), bytes.end(),
            bytes_.begin() + static_cast<std::ptrdiff_t>(p.payload() - base_));
  return ok();
}

std::uint8_t TagGranuleStore::granule_tag(std::uint64_t addr) const {
  return tags_[(addr - base_) / kGranule];
}

std::string TagGranuleStore::dump() const {
  std::string out;
  char buf[8];
  for (std::uint64_t g = 0; g < tags_.size(); ++g) {
    char head[40];
    std::snprintf(head, sizeof head, "%012llx %x",
                  static_cast<unsigned long long>(base_ + g * kGranule), tags_[g]);
    out += head;
    for (std::uint64_t i = 0; i < kGranule; ++i) {
      std::snprintf(buf, sizeof buf, " %02x", bytes_[g * kGranule + i]);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

Result<void> AddressSpace::map(std::uint64_t base, std::uint64_t length) {
  if (base % kGranule != 0) return Error(Errc::UnalignedAddress, base);
  if ((base & ~kPayloadMask) != 0) return Error(Errc::OutOfBounds, base, "beyond 48-bit space");
  const std::uint64_t len = round_up_granule(length);
  auto next = regions_.lower_bound(base);
  if (next != regions_.end() && next->first < base + len) {
    return Error(Errc::OutOfBounds, base, "overlaps existing mapping");
  }
  if (next != regions_.begin()) {
    auto prev = std::prev(next);
    if (prev->first + prev->second.length() > base) {
      return Error(Errc::OutOfBounds, base, "overlaps existing mapping");
    }
  }
  regions_.emplace(base, TagGranuleStore(base, len));
  return ok();
}

const TagGranuleStore* AddressSpace::find(std::uint64_t addr) const {
  auto it = regions_.upper_bound(addr);
  if (it == regions_.begin()) return nullptr;
  --it;
  return it->second.contains(addr) ? &it->second : nullptr;
}

TagGranuleStore* AddressSpace::find(std::uint64_t addr) {
  return const_cast<TagGranuleStore*>(std::as_const(*this).find(addr));
}

Result<SignedValue64> AddressSpace::tag_region(std::uint64_t addr, std::uint64_t size,
                                               std::uint8_t tag) {
  auto* store = find(addr);
  if (store == nullptr) return Error(Errc::Unmapped, addr);
  return store->tag_region(addr, size, tag);
}

Result<void> AddressSpace::stzg_region(std::uint64_t addr, std::uint64_t size) {
  auto* store = find(addr);
  if (store == nullptr) return Error(Errc::Unmapped, addr);
  return store->stzg_region(addr, size);
}

Result<std::vector<std::uint8_t>> AddressSpace::mem_load(SignedValue64 p,
                                                         std::uint64_t width) const {
  if ((p.raw() & kNonCanonicalMask) != 0) {
    return Error(Errc::SegmentationOnCorruptPac, p.raw(), "dereference of unauthenticated pointer");
  }
  const auto* store = find(p.payload());
  if (store == nullptr) return Error(Errc::Unmapped, p.payload());
  return store->load(p, width);
}

Result<void> AddressSpace::mem_store(SignedValue64 p, std::span<const std::uint8_t> bytes) {
  if ((p.raw() & kNonCanonicalMask) != 0) {
    return Error(Errc::SegmentationOnCorruptPac, p.raw(), "dereference of unauthenticated pointer");
  }
  auto* store = find(p.payload());
  if (store == nullptr) return Error(Errc::Unmapped, p.payload());
  return store->store(p, bytes);
}

Result<std::uint64_t> AddressSpace::load_u64(SignedValue64 p) const {
  auto bytes = mem_load(p, 8);
  if (!bytes) return bytes.error();
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | (*bytes)[static_cast<std::size_t>(i)];
  return v;
}

Result<void> AddressSpace::store_u64(SignedValue64 p, std::uint64_t value) {
  std::uint8_t bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<std::uint8_t>(value >> (8 * i));
  return mem_store(p, bytes);
}

Result<std::uint8_t> AddressSpace::granule_tag(std::uint64_t addr) const {
  const auto* store = find(addr);
  if (store == nullptr) return Error(Errc::Unmapped, addr);
  return store->granule_tag(addr);
}

std::string AddressSpace::dump() const {
  std::string out;
  for (const auto& [base, store] : regions_) out += store.dump();
  return out;
}

}  // namespace capac
