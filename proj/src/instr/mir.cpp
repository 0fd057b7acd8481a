#include "capac/instr/mir.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>

namespace capac::instr {

namespace {

struct OpSpelling {
  Op op;
  std::string_view name;
};

constexpr OpSpelling kSpellings[] = {
    {Op::Ldr, "ldr"},       {Op::Str, "str"},       {Op::Ldrb, "ldrb"},     {Op::Strb, "strb"},
    {Op::Mov, "mov"},       {Op::Movi, "movi"},     {Op::Add, "add"},       {Op::Sub, "sub"},
    {Op::And, "and"},       {Op::Orr, "orr"},       {Op::Eor, "eor"},       {Op::Lsl, "lsl"},
    {Op::Lea, "lea"},       {Op::Cmp, "cmp"},       {Op::BEq, "b.eq"},      {Op::BNe, "b.ne"},
    {Op::BLt, "b.lt"},      {Op::BLe, "b.le"},      {Op::BGt, "b.gt"},      {Op::BGe, "b.ge"},
    {Op::B, "b"},           {Op::Cbz, "cbz"},       {Op::Cbnz, "cbnz"},     {Op::Bl, "bl"},
    {Op::Ret, "ret"},       {Op::Brk, "brk"},       {Op::Label, "label"},   {Op::Pacda, "pacda"},
    {Op::Pacdza, "pacdza"}, {Op::Pacdb, "pacdb"},   {Op::Pacdzb, "pacdzb"}, {Op::Autda, "autda"},
    {Op::Autdza, "autdza"}, {Op::Autdb, "autdb"},   {Op::Autdzb, "autdzb"}, {Op::Xpac, "xpac"},
    {Op::FmovFromMod, "fmov"}, {Op::FmovFromTag, "fmov"}, {Op::FmovToTag, "fmov"},
    {Op::ClearTag, "fmov"}, {Op::Stg, "stg"},       {Op::Stzg, "stzg"},     {Op::LdrCurrDom, "ldr"},
    {Op::LdrDst, "ldr"},
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

Error perr(std::string_view what, std::string_view text) {
  return Error(Errc::ParseError, std::string(what) + ": '" + std::string(text) + "'");
}

std::optional<Reg> parse_reg(std::string_view s) {
  s = trim(s);
  if (s == "sp") return kSp;
  if (s == "xzr") return kXzr;
  if (s.size() < 2 || s[0] != 'x') return std::nullopt;
  int n = 0;
  auto [p, ec] = std::from_chars(s.data() + 1, s.data() + s.size(), n);
  if (ec != std::errc() || p != s.data() + s.size() || n < 0 || n > 30) return std::nullopt;
  return n;
}

std::optional<std::int64_t> parse_imm(std::string_view s) {
  s = trim(s);
  if (s.empty() || s[0] != '#') return std::nullopt;
  s.remove_prefix(1);
  bool neg = false;
  if (!s.empty() && s[0] == '-') {
    neg = true;
    s.remove_prefix(1);
  }
  int base = 10;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    base = 16;
    s.remove_prefix(2);
  }
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) return std::nullopt;
  return neg ? -static_cast<std::int64_t>(v) : static_cast<std::int64_t>(v);
}

std::optional<MemOperand> parse_mem(std::string_view s) {
  s = trim(s);
  if (s.size() < 3 || s.front() != '[' || s.back() != ']') return std::nullopt;
  s = trim(s.substr(1, s.size() - 2));
  MemOperand m;
  if (s.starts_with("fi#")) {
    int fi = 0;
    auto [p, ec] = std::from_chars(s.data() + 3, s.data() + s.size(), fi);
    if (ec != std::errc() || p != s.data() + s.size() || fi < 0) return std::nullopt;
    m.frame = true;
    m.fi = fi;
    return m;
  }
  const auto comma = s.find(',');
  auto base = parse_reg(s.substr(0, comma));
  if (!base) return std::nullopt;
  m.base = *base;
  if (comma != std::string_view::npos) {
    auto off = parse_imm(s.substr(comma + 1));
    if (!off) return std::nullopt;
    m.off = *off;
  }
  return m;
}

bool is_ident(std::string_view s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$';
  });
}

// Splits on top-level commas, ignoring those inside [] or ().
std::vector<std::string_view> split_operands(std::string_view s) {
  std::vector<std::string_view> out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '[' || s[i] == '(') ++depth;
    if (s[i] == ']' || s[i] == ')') --depth;
    if (s[i] == ',' && depth == 0) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  if (!trim(s.substr(start)).empty()) out.push_back(trim(s.substr(start)));
  return out;
}

std::string imm_text(std::int64_t v) {
  char buf[32];
  if (v < 0 && v > -4096) {
    std::snprintf(buf, sizeof buf, "#%lld", static_cast<long long>(v));
  } else if (v >= 0 && v < 4096) {
    std::snprintf(buf, sizeof buf, "#%lld", static_cast<long long>(v));
  } else {
    std::snprintf(buf, sizeof buf, "#0x%llx", static_cast<unsigned long long>(v));
  }
  return buf;
}

std::string mem_text(const MemOperand& m) {
  if (m.frame) return "[fi#" + std::to_string(m.fi) + "]";
  if (m.off == 0) return "[" + reg_name(m.base) + "]";
  return "[" + reg_name(m.base) + ", " + imm_text(m.off) + "]";
}

}  // namespace

bool is_reserved(Reg r) {
  return r == kModScratch || r == kSplitScratch || r == kFrameBase || r == kTaggedFrame;
}

std::string reg_name(Reg r) {
  if (r == kSp) return "sp";
  if (r == kXzr) return "xzr";
  return "x" + std::to_string(r);
}

std::string_view op_name(Op op) {
  for (const auto& s : kSpellings) {
    if (s.op == op) return s.name;
  }
  return "?";
}

bool MirInstr::is_branch() const {
  switch (op) {
    case Op::BEq: case Op::BNe: case Op::BLt: case Op::BLe: case Op::BGt: case Op::BGe:
    case Op::B: case Op::Cbz: case Op::Cbnz:
      return true;
    default:
      return false;
  }
}

const MirFunction* MirModule::find(std::string_view name) const {
  for (const auto& f : functions) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

MirFunction* MirModule::find(std::string_view name) {
  for (auto& f : functions) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

Result<MirInstr> parse_mir_instr(std::string_view line) {
  line = trim(line);
  MirInstr ins;
  if (line.starts_with("+")) {
    ins.synthetic = true;
    line = trim(line.substr(1));
  }
  if (line.empty()) return perr("empty instruction", line);
  if (line.back() == ':' && is_ident(line.substr(0, line.size() - 1))) {
    ins.op = Op::Label;
    ins.target = std::string(line.substr(0, line.size() - 1));
    return ins;
  }

  const auto sp = line.find_first_of(" \t");
  const std::string_view mnem = line.substr(0, sp);
  std::string_view rest = sp == std::string_view::npos ? std::string_view{} : trim(line.substr(sp));

  // Peel trailing flags that sit outside brackets.
  std::vector<std::string_view> words;
  {
    int depth = 0;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= rest.size(); ++i) {
      if (i < rest.size() && (rest[i] == '[' || rest[i] == '(')) ++depth;
      if (i < rest.size() && (rest[i] == ']' || rest[i] == ')')) --depth;
      const bool brk = i == rest.size() || (depth == 0 && std::isspace(static_cast<unsigned char>(rest[i])));
      if (brk) {
        if (i > start) words.push_back(rest.substr(start, i - start));
        start = i + 1;
      }
    }
  }
  std::size_t keep = words.size();
  while (keep > 0) {
    const std::string_view w = words[keep - 1];
    if (w == "spill") ins.spill = true;
    else if (w == "reload") ins.reload = true;
    else if (w == "!ptr") ins.meta = Meta::Ptr;
    else if (w == "!ptr.s") ins.meta = Meta::PtrSensitive;
    else if (w == "!int") ins.meta = Meta::Int;
    else break;
    --keep;
  }
  if (keep > 0) {
    const char* first = words[0].data();
    const char* last = words[keep - 1].data() + words[keep - 1].size();
    rest = std::string_view(first, static_cast<std::size_t>(last - first));
  } else {
    rest = {};
  }
  const auto ops = split_operands(rest);
  auto need = [&](std::size_t n) { return ops.size() == n; };
  auto reg_at = [&](std::size_t i) { return i < ops.size() ? parse_reg(ops[i]) : std::nullopt; };

  auto three_operand = [&](Op op) -> Result<MirInstr> {
    if (!need(3)) return perr("expected 3 operands", line);
    auto d = reg_at(0), n = reg_at(1);
    if (!d || !n) return perr("bad register", line);
    ins.op = op;
    ins.rd = *d;
    ins.rn = *n;
    if (auto m = reg_at(2)) {
      ins.rm = *m;
    } else if (auto imm = parse_imm(ops[2])) {
      ins.imm = *imm;
      ins.has_imm = true;
    } else {
      return perr("bad operand", line);
    }
    return ins;
  };

  if (mnem == "ldr" || mnem == "str" || mnem == "ldrb" || mnem == "strb") {
    if (!need(2)) return perr("expected 2 operands", line);
    auto r = reg_at(0);
    if (!r) return perr("bad register", line);
    ins.rd = *r;
    if (mnem == "ldr" && ops[1] == "=curr_dom") {
      ins.op = Op::LdrCurrDom;
      return ins;
    }
    if (mnem == "ldr" && ops[1].starts_with("=dst[") && ops[1].ends_with("]")) {
      auto idx = parse_reg(ops[1].substr(5, ops[1].size() - 6));
      if (!idx) return perr("bad dst index", line);
      ins.op = Op::LdrDst;
      ins.rn = *idx;
      return ins;
    }
    auto m = parse_mem(ops[1]);
    if (!m) return perr("bad memory operand", line);
    ins.mem = *m;
    ins.op = mnem == "ldr" ? Op::Ldr : mnem == "str" ? Op::Str : mnem == "ldrb" ? Op::Ldrb : Op::Strb;
    return ins;
  }
  if (mnem == "mov") {
    if (!need(2)) return perr("expected 2 operands", line);
    auto d = reg_at(0), n = reg_at(1);
    if (!d || !n) return perr("bad register", line);
    ins.op = Op::Mov;
    ins.rd = *d;
    ins.rn = *n;
    return ins;
  }
  if (mnem == "movi") {
    if (!need(2)) return perr("expected 2 operands", line);
    auto d = reg_at(0);
    auto imm = parse_imm(ops[1]);
    if (!d || !imm) return perr("bad operand", line);
    ins.op = Op::Movi;
    ins.rd = *d;
    ins.imm = *imm;
    ins.has_imm = true;
    return ins;
  }
  if (mnem == "add") return three_operand(Op::Add);
  if (mnem == "sub") return three_operand(Op::Sub);
  if (mnem == "and") return three_operand(Op::And);
  if (mnem == "orr") return three_operand(Op::Orr);
  if (mnem == "eor") return three_operand(Op::Eor);
  if (mnem == "lsl") return three_operand(Op::Lsl);
  if (mnem == "lea") {
    if (!need(2)) return perr("expected 2 operands", line);
    auto d = reg_at(0);
    auto m = parse_mem(ops[1]);
    if (!d || !m) return perr("bad operand", line);
    ins.op = Op::Lea;
    ins.rd = *d;
    ins.mem = *m;
    return ins;
  }
  if (mnem == "cmp") {
    if (!need(2)) return perr("expected 2 operands", line);
    auto n = reg_at(0);
    if (!n) return perr("bad register", line);
    ins.op = Op::Cmp;
    ins.rn = *n;
    if (auto m = reg_at(1)) {
      ins.rm = *m;
    } else if (auto imm = parse_imm(ops[1])) {
      ins.imm = *imm;
      ins.has_imm = true;
    } else {
      return perr("bad operand", line);
    }
    return ins;
  }
  struct CondName {
    std::string_view name;
    Op op;
  };
  constexpr CondName conds[] = {{"b.eq", Op::BEq}, {"b.ne", Op::BNe}, {"b.lt", Op::BLt},
                                {"b.le", Op::BLe}, {"b.gt", Op::BGt}, {"b.ge", Op::BGe},
                                {"b", Op::B}};
  for (const auto& c : conds) {
    if (mnem == c.name) {
      if (!need(1) || !is_ident(ops[0])) return perr("expected label", line);
      ins.op = c.op;
      ins.target = std::string(ops[0]);
      return ins;
    }
  }
  if (mnem == "cbz" || mnem == "cbnz") {
    if (!need(2)) return perr("expected 2 operands", line);
    auto n = reg_at(0);
    if (!n || !is_ident(ops[1])) return perr("bad operand", line);
    ins.op = mnem == "cbz" ? Op::Cbz : Op::Cbnz;
    ins.rn = *n;
    ins.target = std::string(ops[1]);
    return ins;
  }
  if (mnem == "bl") {
    const auto open = rest.find('(');
    if (open == std::string_view::npos || rest.back() != ')') return perr("expected callee(args)", line);
    ins.op = Op::Bl;
    ins.target = std::string(trim(rest.substr(0, open)));
    if (!is_ident(ins.target)) return perr("bad callee", line);
    for (auto a : split_operands(rest.substr(open + 1, rest.size() - open - 2))) {
      auto r = parse_reg(a);
      if (!r) return perr("bad argument", line);
      ins.args.push_back(*r);
    }
    return ins;
  }
  if (mnem == "ret" || mnem == "brk") {
    if (!ops.empty()) return perr("unexpected operands", line);
    ins.op = mnem == "ret" ? Op::Ret : Op::Brk;
    return ins;
  }
  struct PaName {
    std::string_view name;
    Op op;
    bool has_mod;
  };
  constexpr PaName pa[] = {{"pacda", Op::Pacda, true},   {"pacdza", Op::Pacdza, false},
                           {"pacdb", Op::Pacdb, true},   {"pacdzb", Op::Pacdzb, false},
                           {"autda", Op::Autda, true},   {"autdza", Op::Autdza, false},
                           {"autdb", Op::Autdb, true},   {"autdzb", Op::Autdzb, false},
                           {"xpac", Op::Xpac, false}};
  for (const auto& p : pa) {
    if (mnem == p.name) {
      if (!need(p.has_mod ? 2 : 1)) return perr("operand count", line);
      auto d = reg_at(0);
      if (!d) return perr("bad register", line);
      ins.op = p.op;
      ins.rd = *d;
      if (p.has_mod) {
        auto m = reg_at(1);
        if (!m) return perr("bad modifier register", line);
        ins.rm = *m;
      }
      return ins;
    }
  }
  if (mnem == "fmov") {
    if (!need(2)) return perr("expected 2 operands", line);
    if (ops[0] == "TagReg") {
      if (ops[1] == "xzr") {
        ins.op = Op::ClearTag;
        return ins;
      }
      auto n = reg_at(1);
      if (!n) return perr("bad register", line);
      ins.op = Op::FmovToTag;
      ins.rn = *n;
      return ins;
    }
    auto d = reg_at(0);
    if (!d) return perr("bad register", line);
    ins.rd = *d;
    if (ops[1] == "ModReg") ins.op = Op::FmovFromMod;
    else if (ops[1] == "TagReg") ins.op = Op::FmovFromTag;
    else return perr("fmov needs ModReg or TagReg", line);
    return ins;
  }
  if (mnem == "stg" || mnem == "stzg") {
    if (!need(2)) return perr("expected 2 operands", line);
    auto n = reg_at(0);
    auto m = parse_mem(ops[1]);
    if (!n || !m || m->frame) return perr("bad operand", line);
    ins.op = mnem == "stg" ? Op::Stg : Op::Stzg;
    ins.rn = *n;
    ins.mem = *m;
    return ins;
  }
  return perr("unknown mnemonic", mnem);
}

Result<MirModule> parse_mir(std::string_view text) {
  MirModule mod;
  MirFunction* cur = nullptr;
  int lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    if (auto c = line.find(';'); c != std::string_view::npos) line = line.substr(0, c);
    line = trim(line);
    if (line.empty()) continue;
    auto at = [&](Error e) {
      e.detail = "line " + std::to_string(lineno) + ": " + e.detail;
      return e;
    };
    if (cur == nullptr) {
      if (!line.starts_with("func ") || line.back() != '{') {
        return at(perr("expected 'func NAME ... {'", line));
      }
      MirFunction f;
      std::string_view hdr = trim(line.substr(5, line.size() - 6));
      bool first = true;
      while (!hdr.empty()) {
        const auto spc = hdr.find(' ');
        const std::string_view w = hdr.substr(0, spc);
        hdr = spc == std::string_view::npos ? std::string_view{} : trim(hdr.substr(spc));
        if (first) {
          if (!is_ident(w)) return at(perr("bad function name", w));
          f.name = std::string(w);
          first = false;
        } else if (w == "dom_priv_func" || w == "dom_priv_stack") {
          f.dom_priv = true;
        } else if (w.starts_with("frame=")) {
          int n = 0;
          auto [p, ec] = std::from_chars(w.data() + 6, w.data() + w.size(), n);
          if (ec != std::errc() || p != w.data() + w.size() || n < 0) return at(perr("bad frame size", w));
          f.frame_slots = n;
        } else {
          return at(perr("unknown function attribute", w));
        }
      }
      if (f.name.empty()) return at(perr("missing function name", line));
      if (mod.find(f.name) != nullptr) return at(perr("duplicate function", f.name));
      mod.functions.push_back(std::move(f));
      cur = &mod.functions.back();
      continue;
    }
    if (line == "}") {
      cur = nullptr;
      continue;
    }
    auto ins = parse_mir_instr(line);
    if (!ins) return at(ins.error());
    if ((ins->is_load() || ins->is_store() || ins->op == Op::Lea) && ins->mem.frame &&
        ins->mem.fi >= cur->frame_slots) {
      return at(perr("frame index out of range", line));
    }
    cur->body.push_back(std::move(*ins));
  }
  if (cur != nullptr) return Error(Errc::ParseError, "unterminated function " + cur->name);
  return mod;
}

std::string print_instr(const MirInstr& ins) {
  std::string s;
  auto r = [](Reg x) { return reg_name(x); };
  switch (ins.op) {
    case Op::Label: return ins.target + ":";
    case Op::Ldr: case Op::Str: case Op::Ldrb: case Op::Strb:
      s = std::string(op_name(ins.op)) + " " + r(ins.rd) + ", " + mem_text(ins.mem);
      if (ins.spill) s += " spill";
      if (ins.reload) s += " reload";
      if (ins.meta == Meta::Ptr) s += " !ptr";
      if (ins.meta == Meta::PtrSensitive) s += " !ptr.s";
      if (ins.meta == Meta::Int) s += " !int";
      break;
    case Op::Mov: s = "mov " + r(ins.rd) + ", " + r(ins.rn); break;
    case Op::Movi: s = "movi " + r(ins.rd) + ", " + imm_text(ins.imm); break;
    case Op::Add: case Op::Sub: case Op::And: case Op::Orr: case Op::Eor: case Op::Lsl:
      s = std::string(op_name(ins.op)) + " " + r(ins.rd) + ", " + r(ins.rn) + ", " +
          (ins.has_imm ? imm_text(ins.imm) : r(ins.rm));
      break;
    case Op::Lea: s = "lea " + r(ins.rd) + ", " + mem_text(ins.mem); break;
    case Op::Cmp: s = "cmp " + r(ins.rn) + ", " + (ins.has_imm ? imm_text(ins.imm) : r(ins.rm)); break;
    case Op::BEq: case Op::BNe: case Op::BLt: case Op::BLe: case Op::BGt: case Op::BGe: case Op::B:
      s = std::string(op_name(ins.op)) + " " + ins.target;
      break;
    case Op::Cbz: case Op::Cbnz: s = std::string(op_name(ins.op)) + " " + r(ins.rn) + ", " + ins.target; break;
    case Op::Bl: {
      s = "bl " + ins.target + "(";
      for (std::size_t i = 0; i < ins.args.size(); ++i) s += (i ? ", " : "") + r(ins.args[i]);
      s += ")";
      break;
    }
    case Op::Ret: s = "ret"; break;
    case Op::Brk: s = "brk"; break;
    case Op::Pacda: case Op::Pacdb: case Op::Autda: case Op::Autdb:
      s = std::string(op_name(ins.op)) + " " + r(ins.rd) + ", " + r(ins.rm);
      break;
    case Op::Pacdza: case Op::Pacdzb: case Op::Autdza: case Op::Autdzb: case Op::Xpac:
      s = std::string(op_name(ins.op)) + " " + r(ins.rd);
      break;
    case Op::FmovFromMod: s = "fmov " + r(ins.rd) + ", ModReg"; break;
    case Op::FmovFromTag: s = "fmov " + r(ins.rd) + ", TagReg"; break;
    case Op::FmovToTag: s = "fmov TagReg, " + r(ins.rn); break;
    case Op::ClearTag: s = "fmov TagReg, xzr"; break;
    case Op::Stg: case Op::Stzg:
      s = std::string(op_name(ins.op)) + " " + r(ins.rn) + ", " + mem_text(ins.mem);
      break;
    case Op::LdrCurrDom: s = "ldr " + r(ins.rd) + ", =curr_dom"; break;
    case Op::LdrDst: s = "ldr " + r(ins.rd) + ", =dst[" + r(ins.rn) + "]"; break;
  }
  return (ins.synthetic ? "+ " : "  ") + s;
}

std::string print_function(const MirFunction& f) {
  std::string out = "func " + f.name;
  if (f.dom_priv) out += " dom_priv_func";
  out += " frame=" + std::to_string(f.frame_slots) + " {\n";
  for (const auto& ins : f.body) {
    if (ins.op == Op::Label) {
      out += (ins.synthetic ? "+ " : "") + ins.target + ":\n";
    } else {
      out += "  " + print_instr(ins) + "\n";
    }
  }
  out += "}\n";
  return out;
}

std::string print_module(const MirModule& m) {
  std::string out;
  for (std::size_t i = 0; i < m.functions.size(); ++i) {
    if (i) out += "\n";
    out += print_function(m.functions[i]);
  }
  return out;
}

std::vector<Reg> uses(const MirInstr& ins) {
  std::vector<Reg> u;
  auto add = [&u](Reg r) {
    if (r >= 0 && r <= 30 && std::find(u.begin(), u.end(), r) == u.end()) u.push_back(r);
  };
  switch (ins.op) {
    case Op::Ldr: case Op::Ldrb: case Op::Lea:
      if (!ins.mem.frame) add(ins.mem.base);
      break;
    case Op::Str: case Op::Strb:
      add(ins.rd);
      if (!ins.mem.frame) add(ins.mem.base);
      break;
    case Op::Mov: add(ins.rn); break;
    case Op::Add: case Op::Sub: case Op::And: case Op::Orr: case Op::Eor: case Op::Lsl:
      add(ins.rn);
      if (!ins.has_imm) add(ins.rm);
      break;
    case Op::Cmp:
      add(ins.rn);
      if (!ins.has_imm) add(ins.rm);
      break;
    case Op::Cbz: case Op::Cbnz: add(ins.rn); break;
    case Op::Bl: for (Reg a : ins.args) add(a); break;
    case Op::Ret: add(0); break;
    case Op::Pacda: case Op::Pacdb: case Op::Autda: case Op::Autdb:
      add(ins.rd);
      add(ins.rm);
      break;
    case Op::Pacdza: case Op::Pacdzb: case Op::Autdza: case Op::Autdzb: case Op::Xpac:
      add(ins.rd);
      break;
    case Op::FmovToTag: add(ins.rn); break;
    case Op::Stg: case Op::Stzg:
      add(ins.rn);
      add(ins.mem.base);
      break;
    case Op::LdrDst: add(ins.rn); break;
    default: break;
  }
  return u;
}

std::vector<Reg> defs(const MirInstr& ins) {
  auto one = [](Reg r) { return (r >= 0 && r <= 30) ? std::vector<Reg>{r} : std::vector<Reg>{}; };
  switch (ins.op) {
    case Op::Ldr: case Op::Ldrb: case Op::Mov: case Op::Movi: case Op::Add: case Op::Sub:
    case Op::And: case Op::Orr: case Op::Eor: case Op::Lsl: case Op::Lea:
    case Op::Pacda: case Op::Pacdza: case Op::Pacdb: case Op::Pacdzb: case Op::Autda:
    case Op::Autdza: case Op::Autdb: case Op::Autdzb: case Op::Xpac: case Op::FmovFromMod:
    case Op::FmovFromTag: case Op::LdrCurrDom: case Op::LdrDst:
      return one(ins.rd);
    case Op::Bl: return {0};
    default: return {};
  }
}

}  // namespace capac::instr
