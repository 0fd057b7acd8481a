#pragma once

// MTE-style tagged memory: 16-byte granules, 4-bit tags, faulting accesses.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "capac/pa.hpp"
#include "capac/result.hpp"

namespace capac {

inline constexpr std::uint64_t kGranule = 16;

constexpr std::uint64_t round_up_granule(std::uint64_t n) {
  return (n + kGranule - 1) & ~(kGranule - 1);
}

/// One mapped region. length is a multiple of the granule size and every
/// granule has exactly one tag.
class TagGranuleStore {
 public:
  TagGranuleStore(std::uint64_t base, std::uint64_t length);

  std::uint64_t base() const { return base_; }
  std::uint64_t length() const { return length_; }
  bool contains(std::uint64_t addr, std::uint64_t size = 1) const {
    return addr >= base_ && size <= length_ && addr - base_ <= length_ - size;
  }

  /// Sets the tag of every granule covering [addr, addr+size) and returns a
  /// pointer to addr carrying that tag.
  Result<SignedValue64> tag_region(std::uint64_t addr, std::uint64_t size, std::uint8_t tag);
  /// Tag-and-zero: tags become 0 and the bytes are cleared.
  Result<void> stzg_region(std::uint64_t addr, std::uint64_t size);

  Result<std::vector<std::uint8_t>> load(SignedValue64 p, std::uint64_t width) const;
  Result<void> store(SignedValue64 p, std::span<const std::uint8_t> bytes);

  std::uint8_t granule_tag(std::uint64_t addr) const;
  std::span<const std::uint8_t> granule_tags() const { return tags_; }
  std::span<const std::uint8_t> bytes() const { return bytes_; }

  /// Hex dump, one line per granule: `addr tag b0 b1 ... b15`.
  std::string dump() const;

 private:
  Result<void> check_range(std::uint64_t addr, std::uint64_t size) const;
  Result<void> check_tags(SignedValue64 p, std::uint64_t width) const;

  std::uint64_t base_;
  std::uint64_t length_;
  std::vector<std::uint8_t> tags_;
  std::vector<std::uint8_t> bytes_;
};

/// The flat virtual address space of one process: a set of non-overlapping
/// regions keyed by base address.
class AddressSpace {
 public:
  Result<void> map(std::uint64_t base, std::uint64_t length);
  bool is_mapped(std::uint64_t addr) const { return find(addr) != nullptr; }

  Result<SignedValue64> tag_region(std::uint64_t addr, std::uint64_t size, std::uint8_t tag);
  Result<void> stzg_region(std::uint64_t addr, std::uint64_t size);

  Result<std::vector<std::uint8_t>> mem_load(SignedValue64 p, std::uint64_t width) const;
  Result<void> mem_store(SignedValue64 p, std::span<const std::uint8_t> bytes);

  Result<std::uint64_t> load_u64(SignedValue64 p) const;
  Result<void> store_u64(SignedValue64 p, std::uint64_t value);

  Result<std::uint8_t> granule_tag(std::uint64_t addr) const;
  const TagGranuleStore* find(std::uint64_t addr) const;
  TagGranuleStore* find(std::uint64_t addr);
  const std::map<std::uint64_t, TagGranuleStore>& regions() const { return regions_; }

  std::string dump() const;

 private:
  std::map<std::uint64_t, TagGranuleStore> regions_;
};

}  // namespace capac
