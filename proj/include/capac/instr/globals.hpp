#pragma once

// Type-directed constructor that signs every in-memory pointer reachable from
// the globals before program logic runs.

#include <map>
#include <string>
#include <vector>

#include "capac/instr/hir.hpp"
#include "capac/process.hpp"

namespace capac::instr {

struct PathStep {
  enum class Kind { Field, Deref } kind;
  std::uint64_t offset = 0;
};

/// One sign(id): the pointer slot reached from `global` by `steps`.
struct SignSite {
  std::string global;
  std::string path;  // e.g. "g.1" or "(*g.0).1"
  std::vector<PathStep> steps;
};

struct GlobalCtor {
  std::vector<SignSite> sites;
};

inline constexpr int kGlobalCtorDepth = 16;

Result<GlobalCtor> generate_global_ctors(const std::vector<GlobalDecl>& globals, const TypeTable& types,
                                         int depth_bound = kGlobalCtorDepth);

struct GlobalLayout {
  std::map<std::string, std::uint64_t> address;
  std::uint64_t end = 0;
};

Result<GlobalLayout> layout_globals(const std::vector<GlobalDecl>& globals, const TypeTable& types,
                                    std::uint64_t base = ProcessLayout::kDataBase);

/// Signs each site with DA and modifier 0. Paths through a null pointer are
/// skipped. Returns the number of pointers signed.
Result<std::size_t> run_global_ctors(const GlobalCtor& ctor, const GlobalLayout& layout, VirtualProcess& proc);

}  // namespace capac::instr
