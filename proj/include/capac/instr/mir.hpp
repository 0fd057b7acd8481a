#pragma once

// Toy machine IR: a linear instruction list per function over x0..x30, sp and
// xzr, with frame-index memory operands.
//
// Text grammar (one instruction per line, `;` starts a comment):
//
//   module   := { func }
//   func     := "func" NAME ["dom_priv_func" | "dom_priv_stack"] ["frame=" N] "{" { line } "}"
//   line     := LABEL ":" | ["+"] instr
//   instr    := "ldr"|"ldrb" REG "," mem {flag}
//             | "str"|"strb" REG "," mem {flag}
//             | "mov" REG "," REG | "movi" REG "," IMM | "lea" REG "," mem
//             | ("add"|"sub"|"and"|"orr"|"eor"|"lsl") REG "," REG "," (REG | IMM)
//             | "cmp" REG "," (REG | IMM) | "b" LABEL | "b." COND LABEL
//             | ("cbz"|"cbnz") REG "," LABEL | "bl" NAME "(" [REG {"," REG}] ")"
//             | "ret" | "brk" | synthetic
//   mem      := "[" "fi#" N "]" | "[" REG ["," IMM] "]"
//   flag     := "spill" | "reload" | "!ptr" | "!ptr.s" | "!int"
//
// Lines prefixed by "+" are instrumentation output.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "capac/result.hpp"

namespace capac::instr {

using Reg = int;
inline constexpr Reg kNoReg = -1;
inline constexpr Reg kSp = 31;
inline constexpr Reg kXzr = 32;

// Registers the instrumentation owns.
inline constexpr Reg kModScratch = 16;
inline constexpr Reg kSplitScratch = 17;
inline constexpr Reg kFrameBase = 24;
inline constexpr Reg kTaggedFrame = 25;

bool is_reserved(Reg r);
std::string reg_name(Reg r);

enum class Op : std::uint8_t {
  Ldr, Str, Ldrb, Strb,
  Mov, Movi, Add, Sub, And, Orr, Eor, Lsl, Lea,
  Cmp, BEq, BNe, BLt, BLe, BGt, BGe, B, Cbz, Cbnz,
  Bl, Ret, Brk, Label,
  // Instrumentation-only forms.
  Pacda, Pacdza, Pacdb, Pacdzb, Autda, Autdza, Autdb, Autdzb, Xpac,
  FmovFromMod,   // fmov xd, ModReg
  FmovFromTag,   // fmov xd, TagReg
  FmovToTag,     // fmov TagReg, xn
  ClearTag,      // fmov TagReg, xzr
  Stg, Stzg,
  LdrCurrDom,    // ldr xd, =curr_dom
  LdrDst,        // ldr xd, =dst[xn]
};

std::string_view op_name(Op op);

enum class Meta : std::uint8_t { None, Ptr, PtrSensitive, Int };

struct MemOperand {
  bool frame = false;
  int fi = 0;         // frame slot; each slot is 8 bytes at sp + 8*fi
  Reg base = kNoReg;  // when !frame
  std::int64_t off = 0;
};

struct MirInstr {
  Op op = Op::Ret;
  Reg rd = kNoReg;
  Reg rn = kNoReg;
  Reg rm = kNoReg;
  std::int64_t imm = 0;
  bool has_imm = false;
  MemOperand mem;
  bool spill = false;
  bool reload = false;
  Meta meta = Meta::None;
  std::string target;     // label or callee
  std::vector<Reg> args;  // call arguments
  bool synthetic = false;
  int origin = -1;        // index of the source instruction

  bool is_load() const { return op == Op::Ldr || op == Op::Ldrb; }
  bool is_store() const { return op == Op::Str || op == Op::Strb; }
  /// The data register of a load (destination) or store (source).
  Reg data_reg() const { return rd; }
  bool is_branch() const;
  bool is_terminator() const { return op == Op::B || op == Op::Ret || op == Op::Brk; }
};

struct MirFunction {
  std::string name;
  bool dom_priv = false;
  int frame_slots = 0;
  std::vector<MirInstr> body;

  std::uint64_t frame_bytes() const { return ((static_cast<std::uint64_t>(frame_slots) * 8) + 15) & ~15ULL; }
};

struct MirModule {
  std::vector<MirFunction> functions;

  const MirFunction* find(std::string_view name) const;
  MirFunction* find(std::string_view name);
};

Result<MirModule> parse_mir(std::string_view text);
Result<MirInstr> parse_mir_instr(std::string_view line);

std::string print_instr(const MirInstr& ins);
std::string print_function(const MirFunction& f);
std::string print_module(const MirModule& m);

/// Registers read and written by an instruction, ignoring sp/xzr.
std::vector<Reg> uses(const MirInstr& ins);
std::vector<Reg> defs(const MirInstr& ins);

}  // namespace capac::instr
