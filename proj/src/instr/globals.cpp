#include "capac/instr/globals.hpp"

namespace capac::instr {

namespace {

struct Visitor {
  const TypeTable& types;
  int bound;
  GlobalCtor out;
  std::string global;

  Result<void> visit(const std::string& path, std::vector<PathStep>& steps, TypeRef t, int depth) {
    const TypeRef r = types.resolve(t);
    if (!r) return Error(Errc::ParseError, "undefined type " + print_type(t));
    switch (r->kind) {
      case Type::Kind::Int:
      case Type::Kind::Named:
        return ok();
      case Type::Kind::Ptr: {
        out.sites.push_back({global, path, steps});
        if (depth + 1 > bound) {
          return Error(Errc::CyclicTypeError, "pointer chain under " + global + " deeper than " + std::to_string(bound));
        }
        steps.push_back({PathStep::Kind::Deref, 0});
        auto res = visit("(*" + path + ")", steps, r->pointee, depth + 1);
        steps.pop_back();
        return res;
      }
      case Type::Kind::Struct: {
        std::uint64_t off = 0;
        for (std::size_t i = 0; i < r->members.size(); ++i) {
          steps.push_back({PathStep::Kind::Field, off});
          auto res = visit(path + "." + std::to_string(i), steps, r->members[i], depth);
          steps.pop_back();
          if (!res) return res;
          auto sz = types.size_of(r->members[i]);
          if (!sz) return sz.error();
          off += *sz;
        }
        return ok();
      }
    }
    return ok();
  }
};

}  // namespace

Result<GlobalCtor> generate_global_ctors(const std::vector<GlobalDecl>& globals, const TypeTable& types,
                                         int depth_bound) {
  Visitor v{types, depth_bound, {}, {}};
  for (const auto& g : globals) {
    v.global = g.name;
    std::vector<PathStep> steps;
    if (auto r = v.visit(g.name, steps, g.type, 0); !r) return r.error();
  }
  return v.out;
}

Result<GlobalLayout> layout_globals(const std::vector<GlobalDecl>& globals, const TypeTable& types,
                                    std::uint64_t base) {
  GlobalLayout l;
  std::uint64_t at = base;
  for (const auto& g : globals) {
    auto sz = types.size_of(g.type);
    if (!sz) return sz.error();
    if (!l.address.emplace(g.name, at).second) return Error(Errc::ParseError, "duplicate global " + g.name);
    at += (*sz + 15) & ~15ULL;
  }
  l.end = at;
  return l;
}

Result<std::size_t> run_global_ctors(const GlobalCtor& ctor, const GlobalLayout& layout, VirtualProcess& proc) {
  const PaKey& da = proc.ctx.active_da();
  std::size_t signed_count = 0;
  for (const auto& site : ctor.sites) {
    auto base = layout.address.find(site.global);
    if (base == layout.address.end()) return Error(Errc::ParseError, "no address for " + site.global);
    SignedValue64 at(base->second);
    bool reachable = true;
    for (const auto& step : site.steps) {
      if (step.kind == PathStep::Kind::Field) {
        at = at.offset(static_cast<std::int64_t>(step.offset));
        continue;
      }
      auto raw = proc.mem.load_u64(at);
      if (!raw) return raw.error();
      const SignedValue64 p = pac_auth(SignedValue64(*raw), da, 0);
      if (p.has_pac()) return Error(Errc::SegmentationOnCorruptPac, p.raw(), "global ctor path " + site.path);
      if (p.raw() == 0) {
        reachable = false;
        break;
      }
      at = p;
    }
    if (!reachable) continue;
    auto raw = proc.mem.load_u64(at);
    if (!raw) return raw.error();
    auto s = pac_sign(SignedValue64(*raw), da, 0);
    if (!s) return s.error();
    if (auto w = proc.mem.store_u64(at, s->raw()); !w) return w.error();
    proc.log.record(EventKind::PtrSign, proc.ctx.curr_dom(),
                    {{"key", "DA"}, {"ptr", hex(s->raw())}, {"site", "global"}, {"path", site.path}});
    ++signed_count;
  }
  return signed_count;
}

}  // namespace capac::instr
