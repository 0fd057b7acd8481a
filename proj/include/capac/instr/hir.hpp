#pragma once

// High-level SSA IR used for taint analysis, lowered to MIR.
//
//   module  := { "type" NAME "=" TYPE | "global" NAME ":" TYPE | func }
//   func    := "func" NAME "(" [param {"," param}] ")" ["dom_priv_func"] "{" { line } "}"
//   param   := "%" NAME ":" TYPE ["dom_priv"]
//   line    := LABEL ":"
//            | "%" NAME "=" ( "local" TYPE | "field" V "," N | "load" V
//                           | "call" NAME "(" [V {"," V}] ")" ":" TYPE
//                           | "const" N [":" TYPE] | ("add"|"xor") V "," (V | N) )
//            | "store" V "," V            ; value, address
//            | "emit" V | "br" LABEL | "ret" [V]
//            | ("brnull" | "brnull.aut") V "," LABEL "," LABEL
//
// `calloc` takes (count, size); `#` and `;` start comments.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "capac/instr/mir.hpp"
#include "capac/instr/types.hpp"

namespace capac::instr {

struct HirParam {
  std::string name;
  TypeRef type;
  bool dom_priv = false;
};

enum class HirOp { Local, Field, Load, Store, Call, Const, Add, Xor, Emit, BrNull, Br, Ret, Label };

struct HirInstr {
  HirOp op = HirOp::Ret;
  std::string dst;                    // defined value, if any
  std::vector<std::string> operands;  // used values
  std::int64_t imm = 0;
  bool has_imm = false;               // add/xor with a constant
  TypeRef type;                       // local/call/const type
  std::string label, label2;          // branch targets, or label name
  std::string callee;
  bool aut_null = false;              // brnull also matches the failed-auth null
};

struct HirFunction {
  std::string name;
  std::vector<HirParam> params;
  bool dom_priv_func = false;
  std::vector<HirInstr> body;
  std::map<std::string, TypeRef> value_types;
};

struct GlobalDecl {
  std::string name;
  TypeRef type;
};

struct HirModule {
  TypeTable types;
  std::vector<GlobalDecl> globals;
  std::vector<HirFunction> functions;

  const HirFunction* find(std::string_view name) const;
};

Result<HirModule> parse_hir(std::string_view text);
std::string print_hir(const HirFunction& f);

/// Values marked sensitive, by a worklist over def-use chains from DOM_PRIV
/// parameters and capac_malloc results, with store-destination back-tracking.
struct TaintInfo {
  std::set<std::string> sensitive;
};

TaintInfo taint_analyze(const HirFunction& f);

/// Pointer null checks also match the failed-auth image of null.
HirFunction rewrite_null_checks(const HirFunction& f, const TypeTable& types);

/// The canonical failed-auth form of a null pointer.
inline constexpr std::uint64_t kAutNull = 1ULL << 54;

Result<MirFunction> lower(const HirFunction& f, const TypeTable& types, const TaintInfo& taint);
Result<MirModule> lower(const HirModule& m, bool rewrite_nulls = true);

}  // namespace capac::instr
