#include "capac/instr/hir.hpp"

#include <cctype>
#include <charconv>
#include <deque>

namespace capac::instr {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view s) {
  std::vector<std::string_view> out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '(' || s[i] == '{') ++depth;
    if (s[i] == ')' || s[i] == '}') --depth;
    if (s[i] == ',' && depth == 0) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  if (!trim(s.substr(start)).empty()) out.push_back(trim(s.substr(start)));
  return out;
}

bool is_name(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '.') return false;
  }
  return true;
}

std::optional<std::int64_t> parse_int(std::string_view s) {
  s = trim(s);
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
  if (s.empty() || ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return neg ? -static_cast<std::int64_t>(v) : static_cast<std::int64_t>(v);
}

struct FnParser {
  const TypeTable& types;
  HirFunction& f;
  int lineno = 0;

  Error err(const std::string& what) const {
    return Error(Errc::ParseError, "line " + std::to_string(lineno) + ": " + what);
  }

  Result<std::string> value(std::string_view tok) const {
    tok = trim(tok);
    if (tok.size() < 2 || tok[0] != '%' || !is_name(tok.substr(1))) {
      return err("expected a %value, got '" + std::string(tok) + "'");
    }
    std::string n(tok.substr(1));
    if (f.value_types.count(n) == 0) return err("use of undefined value %" + n);
    return n;
  }

  TypeRef type_of(const std::string& v) const { return f.value_types.at(v); }

  Result<void> define(HirInstr& ins, TypeRef t) {
    if (f.value_types.count(ins.dst) != 0) return err("value %" + ins.dst + " defined twice");
    f.value_types[ins.dst] = std::move(t);
    return ok();
  }

  Result<void> line(std::string_view text) {
    HirInstr ins;
    if (text.back() == ':' && is_name(text.substr(0, text.size() - 1))) {
      ins.op = HirOp::Label;
      ins.label = std::string(text.substr(0, text.size() - 1));
      f.body.push_back(std::move(ins));
      return ok();
    }
    if (text[0] == '%') {
      const auto eq = text.find('=');
      if (eq == std::string_view::npos) return err("expected '='");
      const auto lhs = trim(text.substr(1, eq - 1));
      if (!is_name(lhs)) return err("bad value name");
      ins.dst = std::string(lhs);
      text = trim(text.substr(eq + 1));
    }
    const auto sp = text.find_first_of(" \t");
    const std::string_view mnem = text.substr(0, sp);
    const std::string_view rest = sp == std::string_view::npos ? std::string_view{} : trim(text.substr(sp));
    const bool has_dst = !ins.dst.empty();
    auto needs_dst = [&](bool want) -> Result<void> {
      if (want != has_dst) return err(std::string(mnem) + (want ? " needs a result" : " has no result"));
      return ok();
    };

    if (mnem == "local") {
      if (auto r = needs_dst(true); !r) return r;
      auto t = parse_type(rest);
      if (!t) return err(t.error().detail);
      ins.op = HirOp::Local;
      ins.type = *t;
      if (auto r = define(ins, Type::ptr_to(*t)); !r) return r;
    } else if (mnem == "field") {
      if (auto r = needs_dst(true); !r) return r;
      const auto ops = split_commas(rest);
      if (ops.size() != 2) return err("field takes a pointer and an index");
      auto base = value(ops[0]);
      if (!base) return base.error();
      auto idx = parse_int(ops[1]);
      if (!idx || *idx < 0) return err("bad field index");
      const TypeRef bt = types.resolve(type_of(*base));
      const TypeRef st = bt && bt->kind == Type::Kind::Ptr ? types.resolve(bt->pointee) : nullptr;
      if (!st || st->kind != Type::Kind::Struct) return err("field of a non-struct pointer");
      if (static_cast<std::size_t>(*idx) >= st->members.size()) return err("field index out of range");
      ins.op = HirOp::Field;
      ins.operands = {*base};
      ins.imm = *idx;
      if (auto r = define(ins, Type::ptr_to(st->members[static_cast<std::size_t>(*idx)])); !r) return r;
    } else if (mnem == "load") {
      if (auto r = needs_dst(true); !r) return r;
      auto p = value(rest);
      if (!p) return p.error();
      const TypeRef pt = types.resolve(type_of(*p));
      if (!pt || pt->kind != Type::Kind::Ptr) return err("load through a non-pointer");
      const TypeRef vt = types.resolve(pt->pointee);
      if (!vt || vt->kind == Type::Kind::Struct) return err("load of a struct value");
      ins.op = HirOp::Load;
      ins.operands = {*p};
      if (auto r = define(ins, pt->pointee); !r) return r;
    } else if (mnem == "store") {
      if (auto r = needs_dst(false); !r) return r;
      const auto ops = split_commas(rest);
      if (ops.size() != 2) return err("store takes a value and an address");
      auto v = value(ops[0]);
      auto p = value(ops[1]);
      if (!v) return v.error();
      if (!p) return p.error();
      if (!types.is_ptr(type_of(*p))) return err("store through a non-pointer");
      ins.op = HirOp::Store;
      ins.operands = {*v, *p};
    } else if (mnem == "call") {
      if (auto r = needs_dst(true); !r) return r;
      const auto open = rest.find('(');
      const auto colon = rest.rfind(':');
      const auto close = colon == std::string_view::npos ? colon : rest.rfind(')', colon);
      if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
        return err("call syntax is call f(args) : T");
      }
      ins.op = HirOp::Call;
      ins.callee = std::string(trim(rest.substr(0, open)));
      if (!is_name(ins.callee)) return err("bad callee");
      for (auto a : split_commas(rest.substr(open + 1, close - open - 1))) {
        auto v = value(a);
        if (!v) return v.error();
        ins.operands.push_back(*v);
      }
      if (ins.operands.size() > 8) return err("more than 8 arguments");
      auto t = parse_type(trim(rest.substr(colon + 1)));
      if (!t) return err(t.error().detail);
      ins.type = *t;
      if (auto r = define(ins, *t); !r) return r;
    } else if (mnem == "const") {
      if (auto r = needs_dst(true); !r) return r;
      const auto colon = rest.find(':');
      auto n = parse_int(rest.substr(0, colon));
      if (!n) return err("bad constant");
      TypeRef t = Type::int_type();
      if (colon != std::string_view::npos) {
        auto pt = parse_type(trim(rest.substr(colon + 1)));
        if (!pt) return err(pt.error().detail);
        t = *pt;
      }
      ins.op = HirOp::Const;
      ins.imm = *n;
      ins.type = t;
      if (auto r = define(ins, t); !r) return r;
    } else if (mnem == "add" || mnem == "xor") {
      if (auto r = needs_dst(true); !r) return r;
      const auto ops = split_commas(rest);
      if (ops.size() != 2) return err(std::string(mnem) + " takes two operands");
      auto a = value(ops[0]);
      if (!a) return a.error();
      ins.op = mnem == "add" ? HirOp::Add : HirOp::Xor;
      ins.operands = {*a};
      if (auto n = parse_int(ops[1])) {
        ins.imm = *n;
        ins.has_imm = true;
      } else {
        auto b = value(ops[1]);
        if (!b) return b.error();
        ins.operands.push_back(*b);
      }
      if (auto r = define(ins, ins.op == HirOp::Add ? type_of(*a) : Type::int_type()); !r) return r;
    } else if (mnem == "emit") {
      if (auto r = needs_dst(false); !r) return r;
      auto v = value(rest);
      if (!v) return v.error();
      ins.op = HirOp::Emit;
      ins.operands = {*v};
    } else if (mnem == "br") {
      if (auto r = needs_dst(false); !r) return r;
      if (!is_name(rest)) return err("bad label");
      ins.op = HirOp::Br;
      ins.label = std::string(rest);
    } else if (mnem == "brnull" || mnem == "brnull.aut") {
      if (auto r = needs_dst(false); !r) return r;
      const auto ops = split_commas(rest);
      if (ops.size() != 3 || !is_name(ops[1]) || !is_name(ops[2])) return err("brnull takes a value and two labels");
      auto v = value(ops[0]);
      if (!v) return v.error();
      ins.op = HirOp::BrNull;
      ins.operands = {*v};
      ins.label = std::string(ops[1]);
      ins.label2 = std::string(ops[2]);
      ins.aut_null = mnem == "brnull.aut";
    } else if (mnem == "ret") {
      if (auto r = needs_dst(false); !r) return r;
      ins.op = HirOp::Ret;
      if (!rest.empty()) {
        auto v = value(rest);
        if (!v) return v.error();
        ins.operands = {*v};
      }
    } else {
      return err("unknown instruction '" + std::string(mnem) + "'");
    }
    f.body.push_back(std::move(ins));
    return ok();
  }
};

Result<void> check_labels(const HirFunction& f) {
  std::set<std::string> labels;
  for (const auto& i : f.body) {
    if (i.op == HirOp::Label && !labels.insert(i.label).second) {
      return Error(Errc::ParseError, f.name + ": duplicate label " + i.label);
    }
  }
  for (const auto& i : f.body) {
    for (const auto* l : {&i.label, &i.label2}) {
      if (i.op != HirOp::Label && !l->empty() && labels.count(*l) == 0) {
        return Error(Errc::ParseError, f.name + ": undefined label " + *l);
      }
    }
  }
  return ok();
}

}  // namespace

const HirFunction* HirModule::find(std::string_view name) const {
  for (const auto& f : functions) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

Result<HirModule> parse_hir(std::string_view text) {
  HirModule m;
  HirFunction* cur = nullptr;
  int lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    if (auto c = line.find_first_of("#;"); c != std::string_view::npos) line = line.substr(0, c);
    line = trim(line);
    if (line.empty()) continue;
    auto err = [lineno](const std::string& what) {
      return Error(Errc::ParseError, "line " + std::to_string(lineno) + ": " + what);
    };

    if (cur != nullptr) {
      if (line == "}") {
        if (auto r = check_labels(*cur); !r) return r.error();
        cur = nullptr;
        continue;
      }
      FnParser p{m.types, *cur, lineno};
      if (auto r = p.line(line); !r) return r.error();
      continue;
    }
    if (line.starts_with("type ")) {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) return err("type NAME = T");
      const std::string name(trim(line.substr(5, eq - 5)));
      auto t = parse_type(trim(line.substr(eq + 1)));
      if (!is_name(name) || !t) return err("bad type definition");
      if (auto r = m.types.define(name, *t); !r) return err(r.error().detail);
      continue;
    }
    if (line.starts_with("global ")) {
      const auto colon = line.find(':');
      if (colon == std::string_view::npos) return err("global NAME : T");
      GlobalDecl g{std::string(trim(line.substr(7, colon - 7))), nullptr};
      auto t = parse_type(trim(line.substr(colon + 1)));
      if (!is_name(g.name) || !t) return err("bad global");
      g.type = *t;
      m.globals.push_back(std::move(g));
      continue;
    }
    if (!line.starts_with("func ") || line.back() != '{') return err("expected func, type or global");
    HirFunction f;
    const auto open = line.find('(');
    const auto close = line.rfind(')');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
      return err("func NAME(params) {");
    }
    f.name = std::string(trim(line.substr(5, open - 5)));
    if (!is_name(f.name)) return err("bad function name");
    if (m.find(f.name) != nullptr) return err("duplicate function " + f.name);
    const auto attrs = trim(line.substr(close + 1, line.size() - close - 2));
    if (attrs == "dom_priv_func") f.dom_priv_func = true;
    else if (!attrs.empty()) return err("unknown attribute '" + std::string(attrs) + "'");
    for (auto p : split_commas(line.substr(open + 1, close - open - 1))) {
      HirParam hp;
      if (p.ends_with("dom_priv")) {
        hp.dom_priv = true;
        p = trim(p.substr(0, p.size() - 8));
      }
      const auto colon = p.find(':');
      if (p.empty() || p[0] != '%' || colon == std::string_view::npos) return err("param is %name: T");
      hp.name = std::string(trim(p.substr(1, colon - 1)));
      auto t = parse_type(trim(p.substr(colon + 1)));
      if (!is_name(hp.name) || !t) return err("bad parameter");
      hp.type = *t;
      if (f.value_types.count(hp.name) != 0) return err("duplicate parameter");
      f.value_types[hp.name] = hp.type;
      f.params.push_back(std::move(hp));
    }
    if (f.params.size() > 8) return err("more than 8 parameters");
    m.functions.push_back(std::move(f));
    cur = &m.functions.back();
  }
  if (cur != nullptr) return Error(Errc::ParseError, "unterminated function " + cur->name);
  return m;
}

std::string print_hir(const HirFunction& f) {
  std::string s = "func " + f.name + "(";
  for (std::size_t i = 0; i < f.params.size(); ++i) {
    const auto& p = f.params[i];
    s += (i ? ", %" : "%") + p.name + ": " + print_type(p.type) + (p.dom_priv ? " dom_priv" : "");
  }
  s += f.dom_priv_func ? ") dom_priv_func {\n" : ") {\n";
  for (const auto& i : f.body) {
    auto v = [&i](std::size_t k) { return "%" + i.operands[k]; };
    const std::string lhs = i.dst.empty() ? "  " : "  %" + i.dst + " = ";
    switch (i.op) {
      case HirOp::Label: s += i.label + ":\n"; continue;
      case HirOp::Local: s += lhs + "local " + print_type(i.type); break;
      case HirOp::Field: s += lhs + "field " + v(0) + ", " + std::to_string(i.imm); break;
      case HirOp::Load: s += lhs + "load " + v(0); break;
      case HirOp::Store: s += lhs + "store " + v(0) + ", " + v(1); break;
      case HirOp::Call: {
        s += lhs + "call " + i.callee + "(";
        for (std::size_t k = 0; k < i.operands.size(); ++k) s += (k ? ", " : "") + v(k);
        s += ") : " + print_type(i.type);
        break;
      }
      case HirOp::Const: s += lhs + "const " + std::to_string(i.imm) + " : " + print_type(i.type); break;
      case HirOp::Add: case HirOp::Xor:
        s += lhs + (i.op == HirOp::Add ? "add " : "xor ") + v(0) + ", " +
             (i.has_imm ? std::to_string(i.imm) : v(1));
        break;
      case HirOp::Emit: s += lhs + "emit " + v(0); break;
      case HirOp::Br: s += lhs + "br " + i.label; break;
      case HirOp::BrNull:
        s += lhs + (i.aut_null ? "brnull.aut " : "brnull ") + v(0) + ", " + i.label + ", " + i.label2;
        break;
      case HirOp::Ret: s += lhs + (i.operands.empty() ? "ret" : "ret " + v(0)); break;
    }
    s += "\n";
  }
  return s + "}\n";
}

TaintInfo taint_analyze(const HirFunction& f) {
  TaintInfo t;
  std::map<std::string, std::vector<std::size_t>> users;
  for (std::size_t i = 0; i < f.body.size(); ++i) {
    for (const auto& o : f.body[i].operands) users[o].push_back(i);
  }
  std::deque<std::string> work;
  auto mark = [&](const std::string& v) {
    if (t.sensitive.insert(v).second) work.push_back(v);
  };
  for (const auto& p : f.params) {
    if (p.dom_priv) mark(p.name);
  }
  for (const auto& i : f.body) {
    if (i.op == HirOp::Call && i.callee == "capac_malloc") mark(i.dst);
  }
  while (!work.empty()) {
    const std::string v = work.front();
    work.pop_front();
    for (std::size_t idx : users[v]) {
      const HirInstr& u = f.body[idx];
      switch (u.op) {
        case HirOp::Field: case HirOp::Load: case HirOp::Add: case HirOp::Xor:
          mark(u.dst);
          break;
        case HirOp::Store:
          if (u.operands[0] == v) mark(u.operands[1]);
          break;
        default: break;
      }
    }
  }
  return t;
}

HirFunction rewrite_null_checks(const HirFunction& f, const TypeTable& types) {
  HirFunction out = f;
  for (auto& i : out.body) {
    if (i.op == HirOp::BrNull && types.is_ptr(out.value_types.at(i.operands[0]))) i.aut_null = true;
  }
  return out;
}

namespace {

MirInstr mk(Op op) {
  MirInstr m;
  m.op = op;
  return m;
}

MirInstr frame_access(Op op, Reg r, int slot, bool spill, bool reload, Meta meta = Meta::None) {
  MirInstr m = mk(op);
  m.rd = r;
  m.mem.frame = true;
  m.mem.fi = slot;
  m.spill = spill;
  m.reload = reload;
  m.meta = meta;
  return m;
}

}  // namespace

Result<MirFunction> lower(const HirFunction& f, const TypeTable& types, const TaintInfo& taint) {
  MirFunction out;
  out.name = f.name;
  out.dom_priv = f.dom_priv_func;

  std::map<std::string, int> slot;
  int next = 0;
  for (const auto& p : f.params) slot[p.name] = next++;
  for (const auto& i : f.body) {
    if (!i.dst.empty()) slot[i.dst] = next++;
  }
  std::map<std::size_t, int> storage;
  for (std::size_t k = 0; k < f.body.size(); ++k) {
    if (f.body[k].op != HirOp::Local) continue;
    auto sz = types.size_of(f.body[k].type);
    if (!sz) return sz.error();
    storage[k] = next;
    next += static_cast<int>(std::max<std::uint64_t>(1, (*sz + 7) / 8));
  }
  out.frame_slots = next;

  auto tainted = [&taint](const std::string& v) { return taint.sensitive.count(v) != 0; };
  auto meta_for = [&](TypeRef t, bool sensitive) -> Result<Meta> {
    if (types.is_ptr(t)) return sensitive ? Meta::PtrSensitive : Meta::Ptr;
    if (types.is_int(t)) return Meta::Int;
    return Error(Errc::LoweringError, "no register type for " + print_type(t));
  };
  auto& b = out.body;
  auto reload = [&](Reg r, const std::string& v) { b.push_back(frame_access(Op::Ldr, r, slot.at(v), false, true)); };
  auto spill = [&](Reg r, const std::string& v) { b.push_back(frame_access(Op::Str, r, slot.at(v), true, false)); };

  for (std::size_t k = 0; k < f.params.size(); ++k) {
    const auto& p = f.params[k];
    auto meta = meta_for(p.type, tainted(p.name));
    if (!meta) return meta.error();
    b.push_back(frame_access(Op::Str, static_cast<Reg>(k), slot.at(p.name), true, false, *meta));
  }

  constexpr Reg kA = 9, kB = 10, kR = 12;
  for (std::size_t k = 0; k < f.body.size(); ++k) {
    const HirInstr& i = f.body[k];
    switch (i.op) {
      case HirOp::Label: {
        MirInstr l = mk(Op::Label);
        l.target = i.label;
        b.push_back(l);
        break;
      }
      case HirOp::Local: {
        MirInstr l = mk(Op::Lea);
        l.rd = kR;
        l.mem.frame = true;
        l.mem.fi = storage.at(k);
        b.push_back(l);
        spill(kR, i.dst);
        break;
      }
      case HirOp::Field: {
        const TypeRef pt = types.resolve(f.value_types.at(i.operands[0]));
        auto off = types.field_offset(pt->pointee, static_cast<std::size_t>(i.imm));
        if (!off) return off.error();
        reload(kA, i.operands[0]);
        MirInstr a = mk(Op::Add);
        a.rd = kR;
        a.rn = kA;
        a.imm = static_cast<std::int64_t>(*off);
        a.has_imm = true;
        b.push_back(a);
        spill(kR, i.dst);
        break;
      }
      case HirOp::Load: {
        auto meta = meta_for(f.value_types.at(i.dst), tainted(i.operands[0]) || tainted(i.dst));
        if (!meta) return meta.error();
        reload(kA, i.operands[0]);
        MirInstr l = mk(Op::Ldr);
        l.rd = kR;
        l.mem.base = kA;
        l.meta = *meta;
        b.push_back(l);
        spill(kR, i.dst);
        break;
      }
      case HirOp::Store: {
        const auto& v = i.operands[0];
        const auto& p = i.operands[1];
        auto meta = meta_for(f.value_types.at(v), tainted(v) || tainted(p));
        if (!meta) return meta.error();
        reload(kA, p);
        reload(kB, v);
        MirInstr s = mk(Op::Str);
        s.rd = kB;
        s.mem.base = kA;
        s.meta = *meta;
        b.push_back(s);
        break;
      }
      case HirOp::Call: {
        MirInstr c = mk(Op::Bl);
        c.target = i.callee;
        for (std::size_t a = 0; a < i.operands.size(); ++a) {
          reload(static_cast<Reg>(a), i.operands[a]);
          c.args.push_back(static_cast<Reg>(a));
        }
        b.push_back(c);
        spill(0, i.dst);
        break;
      }
      case HirOp::Const: {
        MirInstr c = mk(Op::Movi);
        c.rd = kR;
        c.imm = i.imm;
        c.has_imm = true;
        b.push_back(c);
        spill(kR, i.dst);
        break;
      }
      case HirOp::Add: case HirOp::Xor: {
        reload(kA, i.operands[0]);
        MirInstr a = mk(i.op == HirOp::Add ? Op::Add : Op::Eor);
        a.rd = kR;
        a.rn = kA;
        if (i.has_imm) {
          a.imm = i.imm;
          a.has_imm = true;
        } else {
          reload(kB, i.operands[1]);
          a.rm = kB;
        }
        b.push_back(a);
        spill(kR, i.dst);
        break;
      }
      case HirOp::Emit: {
        reload(0, i.operands[0]);
        MirInstr c = mk(Op::Bl);
        c.target = "emit";
        c.args = {0};
        b.push_back(c);
        break;
      }
      case HirOp::Br: {
        MirInstr br = mk(Op::B);
        br.target = i.label;
        b.push_back(br);
        break;
      }
      case HirOp::BrNull: {
        reload(kA, i.operands[0]);
        MirInstr z = mk(Op::Cbz);
        z.rn = kA;
        z.target = i.label;
        b.push_back(z);
        if (i.aut_null) {
          MirInstr c = mk(Op::Movi);
          c.rd = kB;
          c.imm = static_cast<std::int64_t>(kAutNull);
          c.has_imm = true;
          b.push_back(c);
          MirInstr cmp = mk(Op::Cmp);
          cmp.rn = kA;
          cmp.rm = kB;
          b.push_back(cmp);
          MirInstr eq = mk(Op::BEq);
          eq.target = i.label;
          b.push_back(eq);
        }
        MirInstr br = mk(Op::B);
        br.target = i.label2;
        b.push_back(br);
        break;
      }
      case HirOp::Ret: {
        if (!i.operands.empty()) reload(0, i.operands[0]);
        b.push_back(mk(Op::Ret));
        break;
      }
    }
  }
  if (b.empty() || b.back().op != Op::Ret) b.push_back(mk(Op::Ret));
  return out;
}

Result<MirModule> lower(const HirModule& m, bool rewrite_nulls) {
  MirModule out;
  for (const auto& f : m.functions) {
    const HirFunction g = rewrite_nulls ? rewrite_null_checks(f, m.types) : f;
    auto r = lower(g, m.types, taint_analyze(g));
    if (!r) return Error(r.error().code, f.name + ": " + r.error().detail);
    out.functions.push_back(std::move(*r));
  }
  return out;
}

}  // namespace capac::instr
