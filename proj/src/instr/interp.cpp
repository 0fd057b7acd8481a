#include "capac/instr/interp.hpp"

#include <array>
#include <unordered_map>

namespace capac::instr {

namespace {

bool uses_db(Op op) { return op == Op::Pacdb || op == Op::Autdb; }
bool zero_modifier(Op op) {
  return op == Op::Pacdza || op == Op::Pacdzb || op == Op::Autdza || op == Op::Autdzb;
}

}  // namespace

Interpreter::Interpreter(const MirModule& module, VirtualProcess& proc, InterpOptions opts)
    : module_(module), proc_(proc), opts_(std::move(opts)) {}

Result<std::uint64_t> Interpreter::call(std::string_view fn, const std::vector<std::uint64_t>& args) {
  const MirFunction* f = module_.find(fn);
  if (f == nullptr) return Error(Errc::ParseError, "no function " + std::string(fn));
  for (std::size_t i = 0; i < args.size() && i < 8; ++i) x_[i] = args[i];
  sp_ = proc_.stack.sp();
  if (auto r = run(*f); !r) return r.error();
  return x_[0];
}

bool Interpreter::condition(Op op) const {
  switch (op) {
    case Op::BEq: return cmp_a_ == cmp_b_;
    case Op::BNe: return cmp_a_ != cmp_b_;
    case Op::BLt: return cmp_a_ < cmp_b_;
    case Op::BLe: return cmp_a_ <= cmp_b_;
    case Op::BGt: return cmp_a_ > cmp_b_;
    case Op::BGe: return cmp_a_ >= cmp_b_;
    default: return true;
  }
}

const PaKey& Interpreter::key_for(Op op) const {
  return uses_db(op) || op == Op::Pacdzb || op == Op::Autdzb ? proc_.ctx.active_db() : proc_.ctx.active_da();
}

Result<std::uint64_t> Interpreter::address(const MirFunction& f, const MemOperand& m) const {
  if (m.frame) {
    if (m.fi < 0 || m.fi >= f.frame_slots) return Error(Errc::OutOfBounds, "frame index " + std::to_string(m.fi));
    return sp_ + 8 * static_cast<std::uint64_t>(m.fi);
  }
  const std::uint64_t b = m.base == kSp ? sp_ : m.base == kXzr ? 0 : x_[m.base];
  return b + static_cast<std::uint64_t>(m.off);
}

Result<bool> Interpreter::builtin(const std::string& name) {
  auto& p = proc_;
  const unsigned dom = p.ctx.curr_dom();
  if (name == "malloc" || name == "calloc") {
    const std::uint64_t n = name == "malloc" ? x_[0] : x_[0] * x_[1];
    auto r = ambient_malloc(p.mem, p.heap, n, dom, &p.log);
    if (!r) return r.error();
    if (name == "calloc" && n > 0) {
      std::vector<std::uint8_t> zeros(n, 0);
      if (auto w = p.mem.mem_store(*r, zeros); !w) return w.error();
    }
    x_[0] = r->raw();
  } else if (name == "free") {
    if (auto r = ambient_free(p.mem, p.heap, SignedValue64(x_[0]), dom, &p.log); !r) return r.error();
  } else if (name == "capac_malloc") {
    auto r = capac_malloc(p.ctx, p.domains(), p.mem, p.heap, x_[0], &p.log);
    if (!r) return r.error();
    x_[0] = r->raw();
  } else if (name == "capac_free") {
    if (auto r = capac_free(p.ctx, p.domains(), p.mem, p.heap, SignedValue64(x_[0]), &p.log); !r) {
      return r.error();
    }
  } else if (name == "emit") {
    outputs_.push_back(x_[0]);
    p.log.record(EventKind::Output, dom, {{"value", std::to_string(x_[0])}});
  } else {
    return false;
  }
  return true;
}

Result<void> Interpreter::run(const MirFunction& f) {
  if (++depth_ > 256) return Error(Errc::ExecutionLimit, "call depth");
  std::unordered_map<std::string, std::size_t> labels;
  for (std::size_t i = 0; i < f.body.size(); ++i) {
    if (f.body[i].op == Op::Label) labels.emplace(f.body[i].target, i);
  }
  const std::uint64_t frame = f.frame_bytes();
  auto base = proc_.stack.push(frame);
  if (!base) return base.error();
  const std::uint64_t saved_sp = sp_;
  sp_ = *base;

  auto& ctx = proc_.ctx;
  auto& log = proc_.log;
  auto rd = [this](Reg r) -> std::uint64_t {
    if (r == kSp) return sp_;
    if (r < 0 || r > 30) return 0;
    return x_[r];
  };
  auto wr = [this](Reg r, std::uint64_t v) {
    if (r >= 0 && r <= 30) x_[r] = v;
  };
  auto leave = [&]() {
    proc_.stack.pop(frame);
    sp_ = saved_sp;
    --depth_;
  };

  std::size_t pc = 0;
  while (pc < f.body.size()) {
    if (++steps_ > opts_.step_limit) {
      leave();
      return Error(Errc::ExecutionLimit, "step limit in " + f.name);
    }
    const MirInstr& I = f.body[pc];
    std::size_t next = pc + 1;
    auto fail = [&](Error e) -> Result<void> {
      leave();
      if (e.detail.empty()) e.detail = f.name + ":" + std::to_string(pc);
      else e.detail = f.name + ":" + std::to_string(pc) + ": " + e.detail;
      return e;
    };
    const std::uint64_t b = I.has_imm ? static_cast<std::uint64_t>(I.imm) : rd(I.rm);

    switch (I.op) {
      case Op::Label: break;
      case Op::Ldr: case Op::Ldrb: {
        auto a = address(f, I.mem);
        if (!a) return fail(a.error());
        if (opts_.before_load) opts_.before_load(proc_, f, pc, *a);
        auto v = proc_.mem.mem_load(SignedValue64(*a), I.op == Op::Ldr ? 8 : 1);
        if (!v) return fail(v.error());
        std::uint64_t w = 0;
        for (std::size_t k = 0; k < v->size(); ++k) w |= static_cast<std::uint64_t>((*v)[k]) << (8 * k);
        wr(I.rd, w);
        break;
      }
      case Op::Str: case Op::Strb: {
        auto a = address(f, I.mem);
        if (!a) return fail(a.error());
        const std::uint64_t v = rd(I.rd);
        std::array<std::uint8_t, 8> bytes{};
        for (std::size_t k = 0; k < 8; ++k) bytes[k] = static_cast<std::uint8_t>(v >> (8 * k));
        auto s = proc_.mem.mem_store(SignedValue64(*a),
                                     std::span<const std::uint8_t>(bytes.data(), I.op == Op::Str ? 8 : 1));
        if (!s) return fail(s.error());
        break;
      }
      case Op::Mov: wr(I.rd, rd(I.rn)); break;
      case Op::Movi: wr(I.rd, static_cast<std::uint64_t>(I.imm)); break;
      case Op::Add: wr(I.rd, rd(I.rn) + b); break;
      case Op::Sub: wr(I.rd, rd(I.rn) - b); break;
      case Op::And: wr(I.rd, rd(I.rn) & b); break;
      case Op::Orr: wr(I.rd, rd(I.rn) | b); break;
      case Op::Eor: wr(I.rd, rd(I.rn) ^ b); break;
      case Op::Lsl: wr(I.rd, rd(I.rn) << (b & 63)); break;
      case Op::Lea: {
        auto a = address(f, I.mem);
        if (!a) return fail(a.error());
        wr(I.rd, *a);
        break;
      }
      case Op::Cmp:
        cmp_a_ = static_cast<std::int64_t>(rd(I.rn));
        cmp_b_ = static_cast<std::int64_t>(b);
        break;
      case Op::BEq: case Op::BNe: case Op::BLt: case Op::BLe: case Op::BGt: case Op::BGe: case Op::B:
      case Op::Cbz: case Op::Cbnz: {
        bool take = condition(I.op);
        if (I.op == Op::Cbz) take = rd(I.rn) == 0;
        if (I.op == Op::Cbnz) take = rd(I.rn) != 0;
        if (take) {
          auto it = labels.find(I.target);
          if (it == labels.end()) return fail(Error(Errc::ParseError, "no label " + I.target));
          next = it->second;
        }
        break;
      }
      case Op::Bl: {
        auto handled = builtin(I.target);
        if (!handled) return fail(handled.error());
        if (*handled) break;
        const MirFunction* callee = module_.find(I.target);
        if (callee == nullptr) return fail(Error(Errc::ParseError, "no function " + I.target));
        std::array<std::uint64_t, 31> saved{};
        std::copy(std::begin(x_), std::end(x_), saved.begin());
        const auto fa = cmp_a_, fb = cmp_b_;
        if (auto r = run(*callee); !r) {
          leave();
          return r;
        }
        const std::uint64_t ret = x_[0];
        std::copy(saved.begin(), saved.end(), std::begin(x_));
        x_[0] = ret;
        cmp_a_ = fa;
        cmp_b_ = fb;
        break;
      }
      case Op::Ret:
        leave();
        return ok();
      case Op::Brk:
        return fail(Error(Errc::DomainAuthFailure, "brk"));
      case Op::Pacda: case Op::Pacdza: case Op::Pacdb: case Op::Pacdzb: {
        const std::uint64_t mod = zero_modifier(I.op) ? 0 : rd(I.rm);
        auto s = pac_sign(SignedValue64(rd(I.rd)), key_for(I.op), mod);
        if (!s) return fail(s.error());
        log.record(EventKind::PtrSign, ctx.curr_dom(),
                   {{"key", uses_db(I.op) || I.op == Op::Pacdzb ? "DB" : "DA"},
                    {"ptr", hex(s->raw())},
                    {"site", "mir"}});
        wr(I.rd, s->raw());
        break;
      }
      case Op::Autda: case Op::Autdza: case Op::Autdb: case Op::Autdzb: {
        const std::uint64_t mod = zero_modifier(I.op) ? 0 : rd(I.rm);
        const SignedValue64 in(rd(I.rd));
        const SignedValue64 out = pac_auth(in, key_for(I.op), mod);
        if (I.op == Op::Autdzb) {
          log.record(EventKind::DomAuth, ctx.curr_dom(), {{"ok", out.has_pac() ? "0" : "1"}, {"site", "mir"}});
        } else {
          log.record(EventKind::PtrAuth, ctx.curr_dom(),
                     {{"key", uses_db(I.op) ? "DB" : "DA"},
                      {"ptr", hex(in.raw())},
                      {"ok", out.has_pac() ? "0" : "1"},
                      {"site", "mir"}});
        }
        wr(I.rd, out.raw());
        break;
      }
      case Op::Xpac: wr(I.rd, xpac(SignedValue64(rd(I.rd))).raw()); break;
      case Op::FmovFromMod: wr(I.rd, ctx.mod_reg()); break;
      case Op::FmovFromTag: wr(I.rd, ctx.tag_reg()); break;
      case Op::FmovToTag: {
        auto m = proc_.domains().authenticate_current_domain(ctx);
        if (!m) return fail(m.error());
        if (*m != rd(I.rn)) {
          proc_.domains().release_tag_mask(ctx);
          return fail(Error(Errc::DomainAuthFailure, rd(I.rn), "tag mask differs from the trusted domain"));
        }
        break;
      }
      case Op::ClearTag: proc_.domains().release_tag_mask(ctx); break;
      case Op::Stg: case Op::Stzg: {
        auto a = address(f, I.mem);
        if (!a) return fail(a.error());
        const SignedValue64 at(*a);
        if (I.op == Op::Stg) {
          const auto tag = SignedValue64(rd(I.rn)).tag();
          if (auto r = proc_.mem.tag_region(at.payload(), 16, tag); !r) return fail(r.error());
        } else if (auto r = proc_.mem.stzg_region(at.payload(), 16); !r) {
          return fail(r.error());
        }
        break;
      }
      case Op::LdrCurrDom: wr(I.rd, ctx.curr_dom()); break;
      case Op::LdrDst: {
        const std::uint64_t id = rd(I.rn);
        auto e = id > 0xFF ? std::nullopt : proc_.domains().dst().lookup(static_cast<DomainId>(id));
        if (!e) return fail(Error(Errc::DomainAuthFailure, "no DST entry"));
        wr(I.rd, e->raw());
        break;
      }
    }
    pc = next;
  }
  leave();
  return ok();
}

}  // namespace capac::instr
