#pragma once

// Domain-private memory: the tagged heap, private stack frames and pointer
// delegation with recoloring.

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "capac/domain.hpp"
#include "capac/events.hpp"
#include "capac/memory.hpp"
#include "capac/pa.hpp"
#include "capac/result.hpp"

namespace capac {

/// First-fit allocator over a statically mapped MTE pool, 16-byte quantum.
class TaggedHeap {
 public:
  struct Allocation {
    std::uint64_t base = 0;
    std::uint64_t size = 0;  // rounded to the granule
    std::uint8_t tag = 0;    // owner at allocation time
    std::vector<std::uint8_t> granule_owner;  // follows recoloring
  };

  TaggedHeap(std::uint64_t base, std::uint64_t length);

  /// Maps the pool into the address space.
  Result<void> attach(AddressSpace& mem) const;

  /// Carves a block, tags it and returns an unsigned pointer carrying the tag.
  Result<SignedValue64> allocate(AddressSpace& mem, std::uint64_t size, std::uint8_t tag);
  /// stzg's the block and returns it to the free list. No ownership checks.
  Result<void> release(AddressSpace& mem, std::uint64_t base);

  const Allocation* live(std::uint64_t base) const;
  const Allocation* containing(std::uint64_t addr) const;
  void note_recolor(std::uint64_t addr, std::uint64_t size, std::uint8_t tag);

  const std::map<std::uint64_t, Allocation>& registry() const { return live_; }
  std::uint64_t base() const { return base_; }
  std::uint64_t length() const { return length_; }

  /// Granule tags equal registered owners inside live blocks; everything
  /// else is tag 0 with zero bytes.
  bool sound(const AddressSpace& mem) const;

 private:
  std::uint64_t base_;
  std::uint64_t length_;
  std::map<std::uint64_t, std::uint64_t> free_;  // base -> size, coalesced
  std::map<std::uint64_t, Allocation> live_;
};

struct StackFrame {
  std::uint64_t base = 0;
  std::uint64_t size = 0;
  std::uint8_t saved_tag = 0;
};

/// Downward-growing stack in its own mapped region.
class StackArena {
 public:
  StackArena(std::uint64_t base, std::uint64_t length);
  Result<void> attach(AddressSpace& mem) const;

  Result<std::uint64_t> push(std::uint64_t size);
  void pop(std::uint64_t size);
  std::uint64_t sp() const { return sp_; }
  std::uint64_t base() const { return base_; }
  std::uint64_t length() const { return length_; }

 private:
  std::uint64_t base_;
  std::uint64_t length_;
  std::uint64_t sp_;
};

/// Heap allocation for the current domain. Authenticates the domain via the
/// DST, then tags the block with its ID.
Result<SignedValue64> capac_malloc(CpuContext& ctx, const DomainManager& dm, AddressSpace& mem,
                                   TaggedHeap& heap, std::uint64_t size, EventLog* log = nullptr);
Result<void> capac_free(CpuContext& ctx, const DomainManager& dm, AddressSpace& mem,
                        TaggedHeap& heap, SignedValue64 p, EventLog* log = nullptr);

/// Ambient malloc/calloc/free: tag 0.
Result<SignedValue64> ambient_malloc(AddressSpace& mem, TaggedHeap& heap, std::uint64_t size,
                                     unsigned dom = 0, EventLog* log = nullptr);
Result<void> ambient_free(AddressSpace& mem, TaggedHeap& heap, SignedValue64 p,
                          unsigned dom = 0, EventLog* log = nullptr);

Result<StackFrame> enter_private_frame(CpuContext& ctx, const DomainManager& dm,
                                       AddressSpace& mem, StackArena& stack, std::uint64_t size);
Result<void> exit_private_frame(CpuContext& ctx, const DomainManager& dm, AddressSpace& mem,
                                StackArena& stack, const StackFrame& frame);

/// Re-homes the block behind the signed pointer stored at ptr_loc: checks,
/// recolors [p, p+size) and rewrites ptr_loc signed for the target instance.
Result<void> capac_delegate_ptr(const CpuContext& ctx, const DomainManager& dm,
                                AddressSpace& mem, TaggedHeap* heap, SignedValue64 ptr_loc,
                                std::uint64_t size, DomainId target, std::uint64_t target_mod,
                                EventLog* log = nullptr);

}  // namespace capac
