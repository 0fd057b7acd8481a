#pragma once

#include <bitset>
#include <compare>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "capac/instr/mir.hpp"
#include "capac/result.hpp"

namespace capac::instr {

using RegSet = std::bitset<31>;

/// live_out[i]: registers live after instruction i, by backward dataflow.
std::vector<RegSet> compute_live_out(const MirFunction& f);

/// A register or a frame index.
struct Loc {
  bool frame = false;
  int idx = 0;

  static Loc reg(Reg r) { return {false, r}; }
  static Loc slot(int fi) { return {true, fi}; }
  std::string to_string() const;
  friend auto operator<=>(const Loc&, const Loc&) = default;
};

/// Live pointer set: location -> sensitive.
using PointerSet = std::map<Loc, bool>;
std::string format_pointer_set(const PointerSet& p);

enum class Access : std::uint8_t { None, Ambient, Sensitive };

struct LivenessResult {
  std::vector<PointerSet> trace;   // P after each instruction
  std::set<int> S;                 // instructions that access pointers
  std::vector<Access> access;      // per instruction
  std::vector<RegSet> live_out;
};

Result<LivenessResult> analyze_pointer_liveness(const MirFunction& f);

/// Sign/auth insertion driven by the live pointer set.
Result<MirFunction> liveness_instrument(const MirFunction& f, const LivenessResult& lr);
Result<MirFunction> liveness_instrument(const MirFunction& f);

/// DST-authenticated prologue, stack tagging and scrubbing epilogue. No-op when
/// `annotated` is false.
MirFunction instrument_function_frame(const MirFunction& f, bool annotated);

/// Both passes; the frame pass applies to dom_priv functions.
Result<MirFunction> instrument(const MirFunction& f);
Result<MirModule> instrument(const MirModule& m);

/// Ops of the synthetic instructions in order.
std::vector<Op> synthetic_ops(const MirFunction& f);

/// Reports pointer accesses not adjacent to a matching pac/aut. `S` and
/// `access` come from the analysis of the uninstrumented function.
std::vector<std::string> audit(const MirFunction& instrumented, const LivenessResult& lr);

inline constexpr std::uint64_t kAmbientTagMask = 0xf0ffffffffffffffULL;

}  // namespace capac::instr
