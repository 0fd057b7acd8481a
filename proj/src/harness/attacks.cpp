#include "capac/harness/attacks.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "capac/instr/interp.hpp"

namespace capac::harness {

namespace {

constexpr std::pair<AttackKind, std::string_view> kKindNames[] = {
    {AttackKind::ForgeFd, "ForgeFd"},
    {AttackKind::ReuseFdCrossDomain, "ReuseFdCrossDomain"},
    {AttackKind::ForgePtrTagOnly, "ForgePtrTagOnly"},
    {AttackKind::ReusePtrCrossDomain, "ReusePtrCrossDomain"},
    {AttackKind::ImpersonateCurrDom, "ImpersonateCurrDom"},
    {AttackKind::ReplayEntryToken, "ReplayEntryToken"},
    {AttackKind::BruteForceFdPac, "BruteForceFdPac"},
    {AttackKind::ReuseClosedFdNumber, "ReuseClosedFdNumber"},
    {AttackKind::ForgePathOpen, "ForgePathOpen"},
    {AttackKind::ForeignPathOpen, "ForeignPathOpen"},
    {AttackKind::ForgeEntryToken, "ForgeEntryToken"},
    {AttackKind::ImpersonatePathOpen, "ImpersonatePathOpen"},
    {AttackKind::ImpersonateMalloc, "ImpersonateMalloc"},
    {AttackKind::DelegateNonOwnedFd, "DelegateNonOwnedFd"},
    {AttackKind::UnsignedFdSyscall, "UnsignedFdSyscall"},
    {AttackKind::UnsignedPtrSyscall, "UnsignedPtrSyscall"},
    {AttackKind::CapEscalation, "CapEscalation"},
    {AttackKind::CorruptSpilledPtr, "CorruptSpilledPtr"},
    {AttackKind::ReusePtrCrossInstance, "ReusePtrCrossInstance"},
    {AttackKind::ReuseFdAfterExit, "ReuseFdAfterExit"},
    {AttackKind::ReuseDelegatedPtr, "ReuseDelegatedPtr"},
    {AttackKind::CorruptHeapPtr, "CorruptHeapPtr"},
};

const std::set<Errc> kPtrFaults = {Errc::SegmentationOnCorruptPac, Errc::TagMismatch, Errc::SignAlreadySigned};

template <typename T>
std::string outcome_name(const Result<T>& r) {
  return r ? "granted" : std::string(errc_name(r.error().code));
}

template <typename T>
bool denied_with(const Result<T>& r, const std::set<Errc>& codes) {
  return !r && codes.count(r.error().code) > 0;
}

Result<void> move_to(Runner& r, const std::string& dom, std::uint64_t mod) {
  if (r.proc().ctx.in_domain()) {
    if (auto e = r.exit_domain(); !e) return e;
  }
  auto d = r.domain(dom);
  if (!d) return Error(Errc::UnknownDomain, dom);
  if (*d == kAmbient) return ok();
  return r.enter(*d, mod);
}

/// An ambient, DA-signed scratch buffer as the instrumented libc would pass it.
Result<PointerArg> scratch_buffer(Runner& r) {
  auto& p = r.proc();
  auto b = ambient_malloc(p.mem, p.heap, 64, p.ctx.curr_dom());
  if (!b) return b.error();
  auto s = pac_sign(*b, p.ctx.active_da(), 0);
  if (!s) return s.error();
  return PointerArg{*s, false};
}

Result<std::uint64_t> try_read(Runner& r, std::uint32_t raw) {
  auto buf = scratch_buffer(r);
  if (!buf) return buf.error();
  auto& p = r.proc();
  return p.kernel.sys_read(p.ctx, p.mem, raw, *buf, 1, &p.log);
}

Result<std::uint64_t> deref(Runner& r, SignedValue64 p) { return r.proc().mem.load_u64(p); }

struct Ctx {
  Runner& r;
  const Directive& d;
  std::mt19937_64& rng;

  std::uint64_t num(const std::string& key, std::uint64_t fallback) const {
    auto it = d.params.find(key);
    if (it == d.params.end()) return fallback;
    return parse_number(it->second).value_or(fallback);
  }
  Result<std::string> need(const std::string& key) const {
    auto it = d.params.find(key);
    if (it == d.params.end()) return Error(Errc::ScenarioParseError, "directive needs " + key + "=");
    return it->second;
  }
};

using Outcome = Result<std::pair<bool, std::string>>;

Outcome forge_fd(Ctx& c) {
  auto var = c.need("fd");
  if (!var) return var.error();
  auto raw = c.r.fd(*var);
  if (!raw) return raw.error();
  const SignedFd genuine(*raw);
  const std::uint64_t n = c.num("trials", 10000);
  auto& p = c.r.proc();
  std::uint64_t plausible = 0, random_hits = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::uint64_t w = c.rng();
    const SignedFd cand = SignedFd::compose(genuine.fd_num(), w & kCapFieldMask, (w >> 5) & 1, (w >> 8) & 0xFF);
    if (cand != genuine && p.kernel.fd_auth(p.ctx, cand.raw(), 0)) ++plausible;
    const auto word = static_cast<std::uint32_t>(c.rng());
    if (word != genuine.raw() && p.kernel.fd_auth(p.ctx, word, 0)) ++random_hits;
  }
  const double bound = forgery_bound(n, 8);
  std::ostringstream os;
  os << "plausible grants " << plausible << "/" << n << " (bound " << static_cast<std::uint64_t>(bound)
     << "), random-word grants " << random_hits << "/" << n;
  return std::pair{static_cast<double>(plausible) <= bound && random_hits == 0, os.str()};
}

Outcome brute_force_fd(Ctx& c) {
  auto var = c.need("fd");
  if (!var) return var.error();
  auto raw = c.r.fd(*var);
  if (!raw) return raw.error();
  const SignedFd g(*raw);
  auto& p = c.r.proc();
  int valid = 0;
  bool genuine_found = false;
  for (unsigned pac = 0; pac < 256; ++pac) {
    const SignedFd cand = SignedFd::compose(g.fd_num(), g.caps(), g.d_bit(), static_cast<std::uint8_t>(pac));
    if (p.kernel.fd_auth(p.ctx, cand.raw(), 0)) {
      ++valid;
      genuine_found |= cand == g;
    }
  }
  return std::pair{valid == 1 && genuine_found, std::to_string(valid) + "/256 codes valid"};
}

const std::set<Errc> kFdDenials = {Errc::FdAuthDenied, Errc::FdCapDenied, Errc::FdReserved};

Outcome reuse_fd_cross_domain(Ctx& c) {
  auto raw = c.r.fd(c.need("fd").value_or(""));
  if (!raw) return raw.error();
  auto into = c.need("in");
  if (!into) return into.error();
  if (auto m = move_to(c.r, *into, c.num("mod", 0)); !m) return m.error();
  auto res = try_read(c.r, *raw);
  return std::pair{denied_with(res, {Errc::FdAuthDenied}), outcome_name(res)};
}

Outcome reuse_fd_after_exit(Ctx& c) {
  auto raw = c.r.fd(c.need("fd").value_or(""));
  if (!raw) return raw.error();
  if (auto m = move_to(c.r, "ambient", 0); !m) return m.error();
  auto res = try_read(c.r, *raw);
  return std::pair{denied_with(res, {Errc::FdAuthDenied}), outcome_name(res)};
}

Outcome reuse_closed_fd(Ctx& c) {
  auto raw = c.r.fd(c.need("fd").value_or(""));
  if (!raw) return raw.error();
  auto path = c.need("path");
  if (!path) return path.error();
  auto& p = c.r.proc();
  (void)p.kernel.sys_close(p.ctx, *raw, &p.log);
  auto fresh = p.kernel.sys_open(p.ctx, *path, &p.log);
  if (!fresh) return fresh.error();
  auto res = try_read(c.r, *raw);
  const bool renumbered = fresh->fd_num() != SignedFd(*raw).fd_num();
  return std::pair{renumbered && denied_with(res, {Errc::FdReserved}),
                   outcome_name(res) + (renumbered ? ", new fd renumbered" : ", fd number reused")};
}

Outcome unsigned_fd(Ctx& c) {
  auto raw = c.r.fd(c.need("fd").value_or(""));
  if (!raw) return raw.error();
  auto res = try_read(c.r, SignedFd(*raw).fd_num());
  return std::pair{denied_with(res, kFdDenials), outcome_name(res)};
}

Outcome cap_escalation(Ctx& c) {
  auto raw = c.r.fd(c.need("fd").value_or(""));
  if (!raw) return raw.error();
  auto& p = c.r.proc();
  auto limited = p.kernel.capac_limit_fd(p.ctx, *raw, kCapRead, &p.log);
  if (!limited) return limited.error();
  auto buf = scratch_buffer(c.r);
  if (!buf) return buf.error();
  auto w1 = p.kernel.sys_write(p.ctx, p.mem, limited->raw(), *buf, 1, &p.log);
  const std::uint32_t regrown = limited->raw() | (static_cast<std::uint32_t>(kCapWrite) << 17);
  auto w2 = p.kernel.sys_write(p.ctx, p.mem, regrown, *buf, 1, &p.log);
  return std::pair{denied_with(w1, {Errc::FdCapDenied}) && denied_with(w2, {Errc::FdAuthDenied}),
                   "limited write " + outcome_name(w1) + ", re-grown caps " + outcome_name(w2)};
}

Outcome delegate_non_owned(Ctx& c) {
  auto raw = c.r.fd(c.need("fd").value_or(""));
  if (!raw) return raw.error();
  auto to = c.r.domain(c.need("to").value_or(""));
  if (!to) return Error(Errc::UnknownDomain, "to=");
  auto& p = c.r.proc();
  auto res = p.kernel.capac_delegate_fd(p.ctx, *raw, *to, c.num("to_mod", 0), kCapFieldMask, &p.log);
  return std::pair{denied_with(res, {Errc::FdAuthDenied}), outcome_name(res)};
}

Outcome forge_ptr_tag_only(Ctx& c) {
  auto pv = c.r.ptr(c.need("ptr").value_or(""));
  if (!pv) return pv.error();
  auto& p = c.r.proc();
  auto stored = p.mem.load_u64(SignedValue64(pv->slot));
  if (!stored) return stored.error();
  const SignedValue64 victim = strip_pac(SignedValue64(*stored));
  // Tag and address copied, PAC guessed.
  const SignedValue64 guessed = victim.with_pac(static_cast<std::uint8_t>(c.rng() & 0x7F));
  auto a = deref(c.r, pac_auth(guessed, p.ctx.active_da(), 0));
  // Through the ambient signing gadget: the tag is masked before pacdza.
  auto laundered = pac_sign(SignedValue64(victim.raw() & kTagClearMask), p.ctx.active_da(), 0);
  if (!laundered) return laundered.error();
  auto b = deref(c.r, pac_auth(*laundered, p.ctx.active_da(), 0));
  return std::pair{denied_with(a, kPtrFaults) && denied_with(b, kPtrFaults),
                   "guessed PAC " + outcome_name(a) + ", laundered " + outcome_name(b)};
}

Outcome reuse_ptr(Ctx& c, bool same_domain) {
  auto pv = c.r.ptr(c.need("ptr").value_or(""));
  if (!pv) return pv.error();
  std::string dom;
  if (same_domain) {
    const DomainId cur = c.r.proc().ctx.curr_dom();
    for (const auto& d : c.r.proc().domains().domains()) {
      if (d.id == cur) dom = d.name;
    }
    if (dom.empty()) return Error(Errc::NotInDomain, "instance reuse needs a domain");
  } else {
    auto in = c.need("in");
    if (!in) return in.error();
    dom = *in;
  }
  if (auto m = move_to(c.r, dom, c.num("mod", 0)); !m) return m.error();
  auto q = c.r.load_ptr(*pv, "attack");
  if (!q) return q.error();
  auto res = deref(c.r, *q);
  return std::pair{denied_with(res, kPtrFaults), outcome_name(res)};
}

Outcome reuse_delegated_ptr(Ctx& c) {
  auto pv = c.r.ptr(c.need("ptr").value_or(""));
  if (!pv) return pv.error();
  auto to = c.r.domain(c.need("to").value_or(""));
  if (!to) return Error(Errc::UnknownDomain, "to=");
  auto& p = c.r.proc();
  auto stale = c.r.load_ptr(*pv, "attack");
  if (!stale) return stale.error();
  if (auto before = deref(c.r, *stale); !before) return before.error();
  auto del = capac_delegate_ptr(p.ctx, p.domains(), p.mem, &p.heap, SignedValue64(pv->slot),
                                c.num("size", pv->size), *to, c.num("to_mod", 0), &p.log);
  if (!del) return del.error();
  auto a = deref(c.r, *stale);
  auto q = c.r.load_ptr(*pv, "attack");
  if (!q) return q.error();
  auto b = deref(c.r, *q);
  return std::pair{denied_with(a, kPtrFaults) && denied_with(b, kPtrFaults),
                   "stale copy " + outcome_name(a) + ", re-signed slot " + outcome_name(b)};
}

Outcome corrupt_heap_ptr(Ctx& c) {
  auto pv = c.r.ptr(c.need("ptr").value_or(""));
  if (!pv) return pv.error();
  auto& p = c.r.proc();
  auto stored = p.mem.load_u64(SignedValue64(pv->slot));
  if (!stored) return stored.error();
  auto attempt = [&](std::uint64_t forged) -> Result<std::uint64_t> {
    if (auto w = p.mem.store_u64(SignedValue64(pv->slot), forged); !w) return w.error();
    auto q = c.r.load_ptr(*pv, "attack");
    if (!q) return q.error();
    return deref(c.r, *q);
  };
  auto a = attempt(*stored + c.num("delta", 16));
  auto b = attempt(*stored ^ (1ULL << kPacShift));
  return std::pair{denied_with(a, kPtrFaults) && denied_with(b, kPtrFaults),
                   "redirected " + outcome_name(a) + ", PAC bit flip " + outcome_name(b)};
}

Outcome unsigned_ptr_syscall(Ctx& c) {
  auto raw = c.r.fd(c.need("fd").value_or(""));
  if (!raw) return raw.error();
  auto pv = c.r.ptr(c.need("ptr").value_or(""));
  if (!pv) return pv.error();
  auto& p = c.r.proc();
  auto stored = p.mem.load_u64(SignedValue64(pv->slot));
  if (!stored) return stored.error();
  const PointerArg buf{strip_pac(SignedValue64(*stored)), pv->sensitive};
  auto res = p.kernel.sys_write(p.ctx, p.mem, *raw, buf, 8, &p.log);
  return std::pair{denied_with(res, kPtrFaults), outcome_name(res)};
}

Outcome corrupt_spilled_ptr(Ctx& c) {
  auto file = c.need("file");
  if (!file) return file.error();
  auto fn = c.need("fn");
  if (!fn) return fn.error();
  auto mod = c.r.program(*file);
  if (!mod) return mod.error();
  std::vector<std::uint64_t> args;
  if (auto it = c.d.params.find("args"); it != c.d.params.end()) {
    std::istringstream ss(it->second);
    for (std::string a; std::getline(ss, a, ',');) {
      auto v = parse_number(a);
      if (!v) return v.error();
      args.push_back(*v);
    }
  }
  const std::uint64_t nth = c.num("nth", 0);
  std::uint64_t seen = 0;
  bool corrupted = false;
  instr::InterpOptions opts;
  opts.before_load = [&](VirtualProcess& proc, const instr::MirFunction& f, std::size_t pc, std::uint64_t addr) {
    const auto& ins = f.body[pc];
    if (corrupted || ins.synthetic || !ins.mem.frame || pc + 1 >= f.body.size()) return;
    const auto& next = f.body[pc + 1];
    const bool authed = next.synthetic && (next.op == instr::Op::FmovFromMod || next.op == instr::Op::Autdb ||
                                           next.op == instr::Op::Autdza);
    if (!authed || seen++ != nth) return;
    auto v = proc.mem.load_u64(SignedValue64(addr));
    if (!v) return;
    (void)proc.mem.store_u64(SignedValue64(addr), *v ^ (1ULL << kPacShift));
    corrupted = true;
  };
  instr::Interpreter interp(*mod, c.r.proc(), opts);
  auto res = interp.call(*fn, args);
  if (!corrupted) return Error(Errc::ScenarioParseError, "no signed spill slot was reloaded");
  return std::pair{denied_with(res, kPtrFaults), outcome_name(res)};
}

Outcome impersonate(Ctx& c, AttackKind k) {
  auto claim = c.r.domain(c.need("claim").value_or(""));
  if (!claim) return Error(Errc::UnknownDomain, "claim=");
  auto& p = c.r.proc();
  p.ctx.overwrite_curr_dom(*claim);
  if (k == AttackKind::ImpersonateCurrDom) {
    auto res = p.domains().authenticate_current_domain(p.ctx);
    return std::pair{denied_with(res, {Errc::DomainAuthFailure}), outcome_name(res)};
  }
  if (k == AttackKind::ImpersonateMalloc) {
    auto res = capac_malloc(p.ctx, p.domains(), p.mem, p.heap, 32, &p.log);
    return std::pair{denied_with(res, {Errc::DomainAuthFailure}), outcome_name(res)};
  }
  auto path = c.need("path");
  if (!path) return path.error();
  auto res = p.kernel.sys_open(p.ctx, *path, &p.log);
  return std::pair{denied_with(res, {Errc::PathAuthDenied}), outcome_name(res)};
}

Outcome replay_token(Ctx& c) {
  auto of = c.r.domain(c.need("token_of").value_or(""));
  auto target = c.r.domain(c.need("target").value_or(""));
  if (!of || !target) return Error(Errc::UnknownDomain, "token_of= / target=");
  const GateHandle* g = c.r.gate(*of);
  if (g == nullptr) return Error(Errc::UnknownDomain, "no gate");
  if (auto m = move_to(c.r, "ambient", 0); !m) return m.error();
  auto& p = c.r.proc();
  const std::uint64_t token = p.domains().make_entry_token(*g);
  CpuContext probe = p.ctx;
  const bool genuine = static_cast<bool>(p.domains().capac_enter(probe, token, *of, 0));
  auto res = p.domains().capac_enter(p.ctx, token, *target, 0);
  return std::pair{genuine && denied_with(res, {Errc::EntryDenied}),
                   outcome_name(res) + (genuine ? ", token genuine for its own gate" : ", token invalid")};
}

Outcome forge_token(Ctx& c) {
  auto target = c.r.domain(c.need("target").value_or(""));
  if (!target) return Error(Errc::UnknownDomain, "target=");
  if (auto m = move_to(c.r, "ambient", 0); !m) return m.error();
  auto& p = c.r.proc();
  const std::uint64_t n = c.num("trials", 10000);
  std::uint64_t grants = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    CpuContext probe = p.ctx;
    if (p.domains().capac_enter(probe, c.rng(), *target, 0)) ++grants;
  }
  return std::pair{grants == 0, "grants " + std::to_string(grants) + "/" + std::to_string(n)};
}

Outcome forge_path(Ctx& c) {
  auto path = c.need("path");
  if (!path) return path.error();
  auto& p = c.r.proc();
  auto canon = p.kernel.resolve(*path);
  if (!canon) return canon.error();
  std::vector<std::string> aliases;
  if (auto link = c.d.params.find("link"); link != c.d.params.end()) {
    if (auto s = p.kernel.create_symlink(link->second, *path); !s) return s.error();
    aliases.push_back(link->second);
  }
  const auto slash = path->rfind('/');
  const std::string dir = path->substr(0, slash), leaf = path->substr(slash + 1);
  aliases.push_back(dir + "/./" + leaf);
  aliases.push_back(dir + "//" + leaf);
  aliases.push_back(dir + "/../" + dir.substr(dir.rfind('/') + 1) + "/" + leaf);
  bool all = true;
  std::string obs;
  for (const auto& a : aliases) {
    auto same = p.kernel.resolve(a);
    auto res = p.kernel.sys_open(p.ctx, a, &p.log);
    const bool meaningful = same && *same == *canon;
    all = all && meaningful && denied_with(res, {Errc::PathAuthDenied});
    if (!obs.empty()) obs += ", ";
    obs += a + " " + outcome_name(res);
  }
  return std::pair{all, obs};
}

Outcome foreign_path(Ctx& c) {
  auto path = c.need("path");
  if (!path) return path.error();
  auto& p = c.r.proc();
  auto res = p.kernel.sys_open(p.ctx, *path, &p.log);
  return std::pair{denied_with(res, {Errc::PathAuthDenied}), outcome_name(res)};
}

}  // namespace

std::string_view attack_kind_name(AttackKind k) {
  for (const auto& [kind, name] : kKindNames) {
    if (kind == k) return name;
  }
  return "?";
}

std::optional<AttackKind> parse_attack_kind(std::string_view s) {
  for (const auto& [kind, name] : kKindNames) {
    if (name == s) return kind;
  }
  return std::nullopt;
}

std::string Directive::param(const std::string& key, const std::string& fallback) const {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

double forgery_bound(std::uint64_t n, unsigned bits) {
  const double p = std::ldexp(1.0, -static_cast<int>(bits));
  const double mean = static_cast<double>(n) * p;
  return mean + 3.0 * std::sqrt(mean * (1.0 - p));
}

Result<AttackSuite> parse_attack_suite(std::string_view text) {
  AttackSuite s;
  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (auto h = raw.find('#'); h != std::string::npos) raw.resize(h);
    std::istringstream ws(raw);
    std::string head;
    if (!(ws >> head)) continue;
    auto bad = [&](const std::string& m) {
      return Error(Errc::ScenarioParseError, "line " + std::to_string(lineno) + ": " + m);
    };
    if (head == "suite") {
      if (!(ws >> s.requirement)) return bad("suite needs a requirement name");
      continue;
    }
    if (head == "scenario") {
      if (!(ws >> s.scenario)) return bad("scenario needs a file");
      continue;
    }
    auto kind = parse_attack_kind(head);
    if (!kind) return bad("unknown attack kind '" + head + "'");
    Directive d;
    d.line = lineno;
    d.kind = *kind;
    for (std::string kv; ws >> kv;) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0) return bad("expected key=value, got '" + kv + "'");
      d.params[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    d.at = d.param("at");
    if (d.at.empty()) return bad("directive needs at=MARK");
    s.directives.push_back(std::move(d));
  }
  if (s.requirement.empty()) return Error(Errc::ScenarioParseError, "missing `suite` line");
  return s;
}

Result<AttackSuite> load_attack_suite(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return Error(Errc::ScenarioParseError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_attack_suite(ss.str());
}

Result<AttackOutcome> run_directive(const Runner& at_mark, const Directive& d, std::uint64_t seed) {
  Runner r = at_mark;
  std::mt19937_64 rng(seed ^ (static_cast<std::uint64_t>(d.line) << 32) ^ static_cast<std::uint64_t>(d.kind));
  Ctx c{r, d, rng};

  const bool self_moving = d.kind == AttackKind::ReuseFdCrossDomain || d.kind == AttackKind::ReusePtrCrossDomain ||
                           d.kind == AttackKind::ReusePtrCrossInstance;
  if (!self_moving && d.params.count("in")) {
    if (auto m = move_to(r, d.param("in"), c.num("mod", 0)); !m) return m.error();
  }

  Outcome o = Error(Errc::ScenarioParseError);
  switch (d.kind) {
    case AttackKind::ForgeFd: o = forge_fd(c); break;
    case AttackKind::BruteForceFdPac: o = brute_force_fd(c); break;
    case AttackKind::ReuseFdCrossDomain: o = reuse_fd_cross_domain(c); break;
    case AttackKind::ReuseFdAfterExit: o = reuse_fd_after_exit(c); break;
    case AttackKind::ReuseClosedFdNumber: o = reuse_closed_fd(c); break;
    case AttackKind::UnsignedFdSyscall: o = unsigned_fd(c); break;
    case AttackKind::CapEscalation: o = cap_escalation(c); break;
    case AttackKind::DelegateNonOwnedFd: o = delegate_non_owned(c); break;
    case AttackKind::ForgePtrTagOnly: o = forge_ptr_tag_only(c); break;
    case AttackKind::ReusePtrCrossDomain: o = reuse_ptr(c, false); break;
    case AttackKind::ReusePtrCrossInstance: o = reuse_ptr(c, true); break;
    case AttackKind::ReuseDelegatedPtr: o = reuse_delegated_ptr(c); break;
    case AttackKind::CorruptHeapPtr: o = corrupt_heap_ptr(c); break;
    case AttackKind::UnsignedPtrSyscall: o = unsigned_ptr_syscall(c); break;
    case AttackKind::CorruptSpilledPtr: o = corrupt_spilled_ptr(c); break;
    case AttackKind::ImpersonateCurrDom:
    case AttackKind::ImpersonateMalloc:
    case AttackKind::ImpersonatePathOpen: o = impersonate(c, d.kind); break;
    case AttackKind::ReplayEntryToken: o = replay_token(c); break;
    case AttackKind::ForgeEntryToken: o = forge_token(c); break;
    case AttackKind::ForgePathOpen: o = forge_path(c); break;
    case AttackKind::ForeignPathOpen: o = foreign_path(c); break;
  }
  if (!o) {
    Error e = o.error();
    e.detail = "line " + std::to_string(d.line) + " " + std::string(attack_kind_name(d.kind)) + ": " + e.detail;
    return e;
  }
  return AttackOutcome{d, o->first, o->second};
}

bool SuiteReport::all_defended() const {
  for (const auto& o : outcomes) {
    if (!o.defended) return false;
  }
  return true;
}

std::string SuiteReport::format() const {
  std::ostringstream os;
  for (const auto& o : outcomes) {
    os << (o.defended ? "DEFENDED " : "BREACHED ") << requirement << " " << attack_kind_name(o.directive.kind)
       << " at=" << o.directive.at << " : " << o.observed << "\n";
  }
  return os.str();
}

Result<SuiteReport> run_attack_suite(const Scenario& sc, const AttackSuite& suite, const RunOptions& opts) {
  auto shared = std::make_shared<const Scenario>(sc);
  SuiteReport rep;
  rep.requirement = suite.requirement;
  std::map<std::string, Runner> snapshots;
  for (const auto& d : suite.directives) {
    auto it = snapshots.find(d.at);
    if (it == snapshots.end()) {
      Runner r(shared, opts);
      if (auto res = r.run_to(d.at); !res) return res.error();
      it = snapshots.emplace(d.at, std::move(r)).first;
    }
    auto o = run_directive(it->second, d, opts.seed);
    if (!o) return o.error();
    rep.outcomes.push_back(std::move(*o));
  }
  return rep;
}

}  // namespace capac::harness
