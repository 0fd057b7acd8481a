#pragma once

// One virtual process: CPU context, address space, kernel, heap, stack and
// event log. Copyable; copies share the sealed domain registry.

#include <cstdint>
#include <memory>

#include "capac/domain.hpp"
#include "capac/events.hpp"
#include "capac/memiso.hpp"
#include "capac/memory.hpp"
#include "capac/refmon.hpp"

namespace capac {

struct ProcessLayout {
  static constexpr std::uint64_t kHeapBase = 0x10000000;
  static constexpr std::uint64_t kHeapSize = 1 << 20;
  static constexpr std::uint64_t kStackBase = 0x20000000;
  static constexpr std::uint64_t kStackSize = 1 << 18;
  static constexpr std::uint64_t kDataBase = 0x30000000;
  static constexpr std::uint64_t kDataSize = 1 << 16;
};

class VirtualProcess {
 public:
  /// Seeded keys and kernel secret.
  explicit VirtualProcess(std::uint64_t seed);
  /// Keys and kernel secret drawn from the OS entropy source.
  static VirtualProcess with_random_keys();

  DomainManager& domains() { return *domains_; }
  const DomainManager& domains() const { return *domains_; }
  std::shared_ptr<const DomainManager> shared_domains() const { return domains_; }

  // Declaration order matters: domains_ must be built first.
 private:
  std::shared_ptr<DomainManager> domains_;

 public:
  CpuContext ctx;
  AddressSpace mem;
  VirtualKernel kernel;
  TaggedHeap heap;
  StackArena stack;
  EventLog log;

 private:
  VirtualProcess(std::shared_ptr<DomainManager> dm, std::uint64_t kernel_secret);
};

}  // namespace capac
