#include "capac/process.hpp"

#include <random>

namespace capac {

namespace {
constexpr std::uint64_t kKernelSeedSalt = 0x6b65726e656c5f73ULL;
}

VirtualProcess::VirtualProcess(std::uint64_t seed)
    : VirtualProcess(std::make_shared<DomainManager>(KeySource(seed)),
                     KeySource(seed ^ kKernelSeedSalt).next_u64()) {}

VirtualProcess::VirtualProcess(std::shared_ptr<DomainManager> dm, std::uint64_t kernel_secret)
    : domains_(std::move(dm)),
      ctx(domains_->make_context()),
      kernel(domains_, kernel_secret),
      heap(ProcessLayout::kHeapBase, ProcessLayout::kHeapSize),
      stack(ProcessLayout::kStackBase, ProcessLayout::kStackSize) {
  (void)heap.attach(mem);
  (void)stack.attach(mem);
  (void)mem.map(ProcessLayout::kDataBase, ProcessLayout::kDataSize);
}

VirtualProcess VirtualProcess::with_random_keys() {
  std::random_device rd;
  const std::uint64_t a = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  const std::uint64_t b = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  return VirtualProcess(std::make_shared<DomainManager>(KeySource(a)), b);
}

}  // namespace capac
