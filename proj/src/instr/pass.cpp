#include "capac/instr/pass.hpp"

#include <unordered_map>

namespace capac::instr {

namespace {

std::unordered_map<std::string, std::size_t> label_index(const MirFunction& f) {
  std::unordered_map<std::string, std::size_t> out;
  for (std::size_t i = 0; i < f.body.size(); ++i) {
    if (f.body[i].op == Op::Label) out.emplace(f.body[i].target, i);
  }
  return out;
}

std::vector<std::vector<std::size_t>> successors(const MirFunction& f) {
  const auto labels = label_index(f);
  std::vector<std::vector<std::size_t>> succ(f.body.size());
  for (std::size_t i = 0; i < f.body.size(); ++i) {
    const auto& ins = f.body[i];
    if (ins.is_branch()) {
      if (auto it = labels.find(ins.target); it != labels.end()) succ[i].push_back(it->second);
    }
    if (!ins.is_terminator() && i + 1 < f.body.size()) succ[i].push_back(i + 1);
  }
  return succ;
}

RegSet to_set(const std::vector<Reg>& regs) {
  RegSet s;
  for (Reg r : regs) {
    if (r >= 0 && r <= 30) s.set(static_cast<std::size_t>(r));
  }
  return s;
}

bool mentions(const MirInstr& ins, Reg r) {
  if (ins.rd == r || ins.rn == r || ins.rm == r) return true;
  if (!ins.mem.frame && ins.mem.base == r) return true;
  for (Reg a : ins.args) {
    if (a == r) return true;
  }
  return false;
}

Error lowering(std::size_t i, const std::string& what) {
  return Error(Errc::LoweringError, "instruction " + std::to_string(i) + ": " + what);
}

MirInstr synth(Op op, int origin) {
  MirInstr s;
  s.op = op;
  s.synthetic = true;
  s.origin = origin;
  return s;
}

MirInstr synth_rd(Op op, Reg rd, int origin, Reg rm = kNoReg) {
  MirInstr s = synth(op, origin);
  s.rd = rd;
  s.rm = rm;
  return s;
}

bool is_pac(Op op) { return op == Op::Pacda || op == Op::Pacdza || op == Op::Pacdb || op == Op::Pacdzb; }
bool is_aut(Op op) { return op == Op::Autda || op == Op::Autdza || op == Op::Autdb || op == Op::Autdzb; }

}  // namespace

std::vector<RegSet> compute_live_out(const MirFunction& f) {
  const auto succ = successors(f);
  const std::size_t n = f.body.size();
  std::vector<RegSet> in(n), out(n);
  std::vector<RegSet> use(n), def(n);
  for (std::size_t i = 0; i < n; ++i) {
    use[i] = to_set(uses(f.body[i]));
    def[i] = to_set(defs(f.body[i]));
  }
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t k = n; k-- > 0;) {
      RegSet o;
      for (auto s : succ[k]) o |= in[s];
      const RegSet ni = use[k] | (o & ~def[k]);
      if (o != out[k] || ni != in[k]) {
        out[k] = o;
        in[k] = ni;
        changed = true;
      }
    }
  }
  return out;
}

std::string Loc::to_string() const {
  return frame ? "fi#" + std::to_string(idx) : reg_name(idx);
}

std::string format_pointer_set(const PointerSet& p) {
  std::string s = "{";
  bool first = true;
  for (const auto& [loc, sens] : p) {
    if (!first) s += ", ";
    first = false;
    s += loc.to_string() + (sens ? ":s" : ":a");
  }
  return s + "}";
}

Result<LivenessResult> analyze_pointer_liveness(const MirFunction& f) {
  LivenessResult lr;
  lr.live_out = compute_live_out(f);
  lr.access.assign(f.body.size(), Access::None);
  PointerSet P;

  for (std::size_t i = 0; i < f.body.size(); ++i) {
    const MirInstr& I = f.body[i];
    for (Reg r : {kModScratch, kSplitScratch, kFrameBase, kTaggedFrame}) {
      if (mentions(I, r)) return lowering(i, "uses reserved register " + reg_name(r));
    }
    const bool meta_ptr = I.meta == Meta::Ptr || I.meta == Meta::PtrSensitive;

    if (I.is_store()) {
      bool access_ptr = false;
      bool sensitive = I.meta == Meta::PtrSensitive;
      const auto src = P.find(Loc::reg(I.rd));
      if (src != P.end()) {
        if (I.meta == Meta::Int) return lowering(i, "!int store of a pointer register");
        access_ptr = true;
        sensitive = sensitive || src->second;
      } else if (meta_ptr) {
        access_ptr = true;
      }
      if (access_ptr) {
        lr.S.insert(static_cast<int>(i));
        lr.access[i] = sensitive ? Access::Sensitive : Access::Ambient;
      }
      if (I.spill && I.mem.frame) {
        if (access_ptr) P[Loc::slot(I.mem.fi)] = sensitive;
        else P.erase(Loc::slot(I.mem.fi));
      }
    } else if (I.is_load()) {
      bool access_ptr = false;
      bool sensitive = I.meta == Meta::PtrSensitive;
      const auto slot = I.mem.frame ? P.find(Loc::slot(I.mem.fi)) : P.end();
      if (slot != P.end()) {
        if (I.meta == Meta::Int) return lowering(i, "!int load of a pointer slot");
        access_ptr = true;
        sensitive = sensitive || slot->second;
      } else if (meta_ptr) {
        access_ptr = true;
      }
      if (access_ptr) {
        lr.S.insert(static_cast<int>(i));
        lr.access[i] = sensitive ? Access::Sensitive : Access::Ambient;
        P[Loc::reg(I.rd)] = sensitive;
      } else {
        P.erase(Loc::reg(I.rd));
      }
    }

    // updateRegisterLiveness
    switch (I.op) {
      case Op::Ldr: case Op::Ldrb: case Op::Str: case Op::Strb:
        break;
      case Op::Mov: case Op::Add: case Op::Sub: case Op::Orr: {
        auto a = P.find(Loc::reg(I.rn));
        auto b = (!I.has_imm && I.op != Op::Mov) ? P.find(Loc::reg(I.rm)) : P.end();
        if (a != P.end() || b != P.end()) {
          const bool s = (a != P.end() && a->second) || (b != P.end() && b->second);
          P[Loc::reg(I.rd)] = s;
        } else {
          P.erase(Loc::reg(I.rd));
        }
        break;
      }
      case Op::Lea:
        P[Loc::reg(I.rd)] = f.dom_priv;
        break;
      case Op::Bl:
        if (I.target == "capac_malloc") P[Loc::reg(0)] = true;
        else if (I.target == "malloc" || I.target == "calloc") P[Loc::reg(0)] = false;
        else P.erase(Loc::reg(0));
        break;
      default:
        for (Reg d : defs(I)) P.erase(Loc::reg(d));
    }
    for (auto it = P.begin(); it != P.end();) {
      if (!it->first.frame && !lr.live_out[i].test(static_cast<std::size_t>(it->first.idx))) {
        it = P.erase(it);
      } else {
        ++it;
      }
    }
    lr.trace.push_back(P);
  }
  return lr;
}

Result<MirFunction> liveness_instrument(const MirFunction& f, const LivenessResult& lr) {
  MirFunction out = f;
  out.body.clear();
  for (std::size_t i = 0; i < f.body.size(); ++i) {
    MirInstr I = f.body[i];
    const int o = static_cast<int>(i);
    I.origin = o;
    const Access a = lr.access[i];
    if (a == Access::None) {
      out.body.push_back(I);
      continue;
    }
    const Reg x = I.rd;
    if (!I.mem.frame && I.mem.base == x) {
      MirInstr mv = synth(Op::Mov, o);
      mv.rd = kSplitScratch;
      mv.rn = x;
      out.body.push_back(mv);
      I.mem.base = kSplitScratch;
    }
    if (I.is_store()) {
      if (a == Access::Sensitive) {
        out.body.push_back(synth_rd(Op::FmovFromMod, kModScratch, o));
        out.body.push_back(synth_rd(Op::Pacdb, x, o, kModScratch));
      } else {
        MirInstr mask = synth(Op::And, o);
        mask.rd = x;
        mask.rn = x;
        mask.imm = static_cast<std::int64_t>(kAmbientTagMask);
        mask.has_imm = true;
        out.body.push_back(mask);
        out.body.push_back(synth_rd(Op::Pacdza, x, o));
      }
      out.body.push_back(I);
      if (lr.live_out[i].test(static_cast<std::size_t>(x))) out.body.push_back(synth_rd(Op::Xpac, x, o));
    } else {
      out.body.push_back(I);
      if (a == Access::Sensitive) {
        out.body.push_back(synth_rd(Op::FmovFromMod, kModScratch, o));
        out.body.push_back(synth_rd(Op::Autdb, x, o, kModScratch));
      } else {
        out.body.push_back(synth_rd(Op::Autdza, x, o));
      }
    }
  }
  return out;
}

Result<MirFunction> liveness_instrument(const MirFunction& f) {
  auto lr = analyze_pointer_liveness(f);
  if (!lr) return lr.error();
  return liveness_instrument(f, *lr);
}

MirFunction instrument_function_frame(const MirFunction& f, bool annotated) {
  if (!annotated) return f;
  MirFunction out = f;
  out.body.clear();
  const int granules = static_cast<int>(f.frame_bytes() / 16);
  constexpr Reg a = kModScratch;
  constexpr Reg b = kSplitScratch;

  auto push = [&out](MirInstr s) { out.body.push_back(std::move(s)); };
  auto s_rd = [](Op op, Reg rd) { return synth_rd(op, rd, -1); };

  // Domain ID authentication.
  push(s_rd(Op::LdrCurrDom, a));
  {
    MirInstr l = s_rd(Op::LdrDst, b);
    l.rn = a;
    push(l);
  }
  push(s_rd(Op::Autdzb, b));
  {
    MirInstr c = synth(Op::Cmp, -1);
    c.rn = b;
    c.rm = a;
    push(c);
  }
  {
    MirInstr br = synth(Op::BNe, -1);
    br.target = ".auth_failed";
    push(br);
  }
  {
    MirInstr sh = synth(Op::Lsl, -1);
    sh.rd = a;
    sh.rn = a;
    sh.imm = 56;
    sh.has_imm = true;
    push(sh);
  }
  {
    MirInstr t = synth(Op::FmovToTag, -1);
    t.rn = a;
    push(t);
  }
  // Tagged frame base.
  push(s_rd(Op::FmovFromTag, a));
  {
    MirInstr mv = synth(Op::Mov, -1);
    mv.rd = kFrameBase;
    mv.rn = kSp;
    push(mv);
  }
  {
    MirInstr orr = synth(Op::Orr, -1);
    orr.rd = kTaggedFrame;
    orr.rn = kFrameBase;
    orr.rm = a;
    push(orr);
  }
  for (int g = 0; g < granules; ++g) {
    MirInstr st = synth(Op::Stg, -1);
    st.rn = kTaggedFrame;
    st.mem.base = kTaggedFrame;
    st.mem.off = 16 * g;
    push(st);
  }

  for (const auto& ins : f.body) {
    if (ins.op == Op::Ret) {
      for (int g = 0; g < granules; ++g) {
        MirInstr z = synth(Op::Stzg, ins.origin);
        z.rn = kFrameBase;
        z.mem.base = kFrameBase;
        z.mem.off = 16 * g;
        push(z);
      }
      push(synth(Op::ClearTag, ins.origin));
      push(ins);
      continue;
    }
    MirInstr copy = ins;
    if ((copy.is_load() || copy.is_store() || copy.op == Op::Lea) && copy.mem.frame) {
      copy.mem.frame = false;
      copy.mem.base = kTaggedFrame;
      copy.mem.off = 8 * copy.mem.fi;
    }
    push(copy);
  }

  MirInstr lbl = synth(Op::Label, -1);
  lbl.target = ".auth_failed";
  push(lbl);
  push(synth(Op::Brk, -1));
  return out;
}

Result<MirFunction> instrument(const MirFunction& f) {
  auto r = liveness_instrument(f);
  if (!r) return r.error();
  return instrument_function_frame(*r, f.dom_priv);
}

Result<MirModule> instrument(const MirModule& m) {
  MirModule out;
  for (const auto& f : m.functions) {
    auto r = instrument(f);
    if (!r) return Error(r.error().code, f.name + ": " + r.error().detail);
    out.functions.push_back(std::move(*r));
  }
  return out;
}

std::vector<Op> synthetic_ops(const MirFunction& f) {
  std::vector<Op> ops;
  for (const auto& ins : f.body) {
    if (ins.synthetic && ins.op != Op::Label) ops.push_back(ins.op);
  }
  return ops;
}

std::vector<std::string> audit(const MirFunction& g, const LivenessResult& lr) {
  std::vector<std::string> v;
  auto note = [&v, &g](std::size_t j, const std::string& what) {
    v.push_back(std::to_string(j) + ": " + print_instr(g.body[j]) + ": " + what);
  };
  for (std::size_t j = 0; j < g.body.size(); ++j) {
    const auto& ins = g.body[j];
    if (ins.op == Op::Xpac) {
      const bool after_store = j > 0 && g.body[j - 1].is_store() && j > 1 && is_pac(g.body[j - 2].op) &&
                               g.body[j - 1].rd == ins.rd;
      if (!after_store) note(j, "xpac outside a sign-then-store sequence");
      continue;
    }
    if (ins.synthetic || !(ins.is_load() || ins.is_store())) continue;
    const bool in_s = ins.origin >= 0 && lr.S.count(ins.origin) > 0;
    const bool meta_ptr = ins.meta == Meta::Ptr || ins.meta == Meta::PtrSensitive;
    if (!in_s && !meta_ptr) continue;
    const bool sensitive = ins.origin >= 0 && static_cast<std::size_t>(ins.origin) < lr.access.size() &&
                           lr.access[static_cast<std::size_t>(ins.origin)] == Access::Sensitive;
    if (ins.is_store()) {
      if (j == 0 || !is_pac(g.body[j - 1].op) || g.body[j - 1].rd != ins.rd) {
        note(j, "pointer store without an adjacent pac");
      } else if (sensitive && g.body[j - 1].op != Op::Pacdb) {
        note(j, "sensitive store signed without DB");
      } else if (!sensitive && g.body[j - 1].op != Op::Pacdza) {
        note(j, "ambient store signed without DA");
      }
    } else {
      if (j + 1 >= g.body.size()) {
        note(j, "pointer load without an adjacent aut");
        continue;
      }
      // A sensitive load reads ModReg first: ldr; fmov; autdb.
      std::size_t k = j + 1;
      if (g.body[k].op == Op::FmovFromMod && k + 1 < g.body.size()) ++k;
      if (!is_aut(g.body[k].op) || g.body[k].rd != ins.rd) {
        note(j, "pointer load without an adjacent aut");
      } else if (sensitive != (g.body[k].op == Op::Autdb)) {
        note(j, "load authenticated under the wrong key");
      }
    }
  }
  return v;
}

}  // namespace capac::instr
