#include "capac/harness/scenario.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "capac/instr/hir.hpp"
#include "capac/instr/interp.hpp"
#include "capac/instr/pass.hpp"

namespace capac::harness {

namespace {

struct VerbSpec {
  std::string_view verb;
  std::size_t min_args;
  std::size_t max_args;  // SIZE_MAX for free text
};

constexpr std::size_t kAny = static_cast<std::size_t>(-1);

constexpr VerbSpec kVerbs[] = {
    {"domain", 2, 2},      {"file", 1, kAny},       {"symlink", 2, 2},  {"assign", 2, 2},
    {"init", 0, 0},        {"enter", 1, 2},         {"exit", 0, 0},     {"open", 2, 2},
    {"close", 1, 1},       {"limit", 2, 2},         {"read", 3, 3},     {"write", 3, 3},
    {"delegate_fd", 4, 5}, {"socket", 1, 1},        {"listen", 1, 1},   {"connect", 1, kAny},
    {"accept", 2, 2},      {"malloc", 2, 2},        {"amalloc", 2, 2},  {"free", 1, 1},
    {"load", 2, 2},        {"store", 3, 3},         {"delegate_ptr", 4, 4},
    {"frame_enter", 1, 1}, {"frame_exit", 0, 0},    {"exec", 2, kAny},  {"mark", 1, 1},
};

const VerbSpec* find_verb(std::string_view v) {
  for (const auto& s : kVerbs) {
    if (s.verb == v) return &s;
  }
  return nullptr;
}

Error parse_error(int line, const std::string& msg) {
  return Error(Errc::ScenarioParseError, "line " + std::to_string(line) + ": " + msg);
}

std::string join_from(const std::vector<std::string>& v, std::size_t from) {
  std::string out;
  for (std::size_t i = from; i < v.size(); ++i) {
    if (i > from) out += ' ';
    out += v[i];
  }
  return out;
}

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

Result<std::string> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return Error(Errc::ScenarioParseError, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Result<std::pair<instr::MirModule, instr::MirModule>> load_program(const std::filesystem::path& p) {
  auto text = read_file(p);
  if (!text) return text.error();
  instr::MirModule plain;
  if (p.extension() == ".hir") {
    auto hir = instr::parse_hir(*text);
    if (!hir) return hir.error();
    auto low = instr::lower(*hir);
    if (!low) return low.error();
    plain = std::move(*low);
  } else {
    auto mir = instr::parse_mir(*text);
    if (!mir) return mir.error();
    plain = std::move(*mir);
  }
  auto inst = instr::instrument(plain);
  if (!inst) return inst.error();
  return std::pair{std::move(plain), std::move(*inst)};
}

}  // namespace

Result<std::uint64_t> parse_number(std::string_view s) {
  int base = 10;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    s.remove_prefix(2);
    base = 16;
  }
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
    return Error(Errc::ScenarioParseError, "bad number '" + std::string(s) + "'");
  }
  return v;
}

Result<std::uint8_t> parse_caps(std::string_view s) {
  std::uint8_t caps = 0;
  if (s == "-") return caps;
  for (char c : s) {
    switch (c) {
      case 'r': caps |= kCapRead; break;
      case 'w': caps |= kCapWrite; break;
      case 's': caps |= kCapSocket; break;
      case 'd': caps |= kCapDelegate; break;
      default: return Error(Errc::ScenarioParseError, "bad capability set '" + std::string(s) + "'");
    }
  }
  return caps;
}

bool Scenario::has_mark(std::string_view m) const {
  for (const auto& s : statements) {
    if (s.verb == "mark" && s.args[0] == m) return true;
  }
  return false;
}

std::size_t Scenario::count(std::string_view verb) const {
  std::size_t n = 0;
  for (const auto& s : statements) n += s.verb == verb;
  return n;
}

Result<Scenario> parse_scenario(std::string_view text, const std::filesystem::path& base_dir,
                                std::string name) {
  Scenario sc;
  sc.name = std::move(name);
  sc.base_dir = base_dir;
  std::set<std::string> fd_vars, ptr_vars, domains{"ambient"}, marks;
  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (auto h = raw.find('#'); h != std::string::npos) raw.resize(h);
    std::istringstream ws(raw);
    Statement st;
    st.line = lineno;
    if (!(ws >> st.verb)) continue;
    for (std::string a; ws >> a;) st.args.push_back(a);
    const VerbSpec* spec = find_verb(st.verb);
    if (spec == nullptr) return parse_error(lineno, "unknown verb '" + st.verb + "'");
    if (st.args.size() < spec->min_args || st.args.size() > spec->max_args) {
      return parse_error(lineno, "wrong number of arguments to " + st.verb);
    }

    auto need = [&](const std::set<std::string>& set, std::size_t i, const char* what) -> Result<void> {
      if (!set.count(st.args[i])) return parse_error(lineno, std::string("undefined ") + what + " " + st.args[i]);
      return ok();
    };
    auto def = [&](std::set<std::string>& set, std::size_t i) -> Result<void> {
      if (st.args[i].size() < 2 || st.args[i][0] != '$') return parse_error(lineno, "expected $variable");
      set.insert(st.args[i]);
      return ok();
    };
    auto num = [&](std::size_t i) -> Result<void> {
      if (auto n = parse_number(st.args[i]); !n) return parse_error(lineno, n.error().detail);
      return ok();
    };
    Result<void> r;
    const std::string& v = st.verb;
    if (v == "domain") {
      if (st.args[0] == "ambient") return parse_error(lineno, "reserved domain name");
      domains.insert(st.args[0]);
      r = num(1);
    } else if (v == "assign") {
      r = need(domains, 1, "domain");
    } else if (v == "enter") {
      r = need(domains, 0, "domain");
      if (r && st.args.size() == 2) r = num(1);
    } else if (v == "open") {
      r = def(fd_vars, 0);
    } else if (v == "socket") {
      r = def(fd_vars, 0);
    } else if (v == "close" || v == "listen" || v == "connect") {
      r = need(fd_vars, 0, "descriptor");
    } else if (v == "limit") {
      r = need(fd_vars, 0, "descriptor");
      if (r) {
        if (auto c = parse_caps(st.args[1]); !c) r = parse_error(lineno, c.error().detail);
      }
    } else if (v == "read" || v == "write") {
      r = need(fd_vars, 0, "descriptor");
      if (r) r = need(ptr_vars, 1, "pointer");
      if (r) r = num(2);
    } else if (v == "delegate_fd") {
      r = need(fd_vars, 0, "descriptor");
      if (r) r = def(fd_vars, 1);
      if (r) r = need(domains, 2, "domain");
      if (r) r = num(3);
      if (r && st.args.size() == 5) {
        if (auto c = parse_caps(st.args[4]); !c) r = parse_error(lineno, c.error().detail);
      }
    } else if (v == "accept") {
      r = need(fd_vars, 0, "descriptor");
      if (r) r = def(fd_vars, 1);
    } else if (v == "malloc" || v == "amalloc") {
      r = def(ptr_vars, 0);
      if (r) r = num(1);
    } else if (v == "free") {
      r = need(ptr_vars, 0, "pointer");
    } else if (v == "load" || v == "store") {
      r = need(ptr_vars, 0, "pointer");
      if (r) r = num(1);
      if (r && v == "store") r = num(2);
    } else if (v == "delegate_ptr") {
      r = need(ptr_vars, 0, "pointer");
      if (r) r = num(1);
      if (r) r = need(domains, 2, "domain");
      if (r) r = num(3);
    } else if (v == "frame_enter") {
      r = num(0);
    } else if (v == "exec") {
      for (std::size_t i = 2; r && i < st.args.size(); ++i) r = num(i);
      if (r && !sc.programs.count(st.args[0])) {
        auto prog = load_program(base_dir / st.args[0]);
        if (!prog) return parse_error(lineno, st.args[0] + ": " + prog.error().to_string());
        sc.plain_programs[st.args[0]] = std::make_shared<instr::MirModule>(std::move(prog->first));
        sc.programs[st.args[0]] = std::make_shared<instr::MirModule>(std::move(prog->second));
      }
      if (r && sc.programs[st.args[0]]->find(st.args[1]) == nullptr) {
        r = parse_error(lineno, "no function " + st.args[1] + " in " + st.args[0]);
      }
    } else if (v == "mark") {
      if (!marks.insert(st.args[0]).second) r = parse_error(lineno, "duplicate mark " + st.args[0]);
    }
    if (!r) return r.error();
    sc.statements.push_back(std::move(st));
  }
  return sc;
}

Result<Scenario> load_scenario(const std::filesystem::path& path) {
  auto text = read_file(path);
  if (!text) return text.error();
  return parse_scenario(*text, path.parent_path(), path.stem().string());
}

Runner::Runner(std::shared_ptr<const Scenario> sc, const RunOptions& opts)
    : sc_(std::move(sc)),
      proc_(opts.random_keys ? VirtualProcess::with_random_keys() : VirtualProcess(opts.seed)) {}

std::optional<DomainId> Runner::domain(std::string_view name) const {
  if (name == "ambient") return kAmbient;
  auto it = domains_.find(name);
  if (it == domains_.end()) return std::nullopt;
  return it->second;
}

Result<DomainId> Runner::domain_arg(const std::string& name) const {
  auto d = domain(name);
  if (!d) return Error(Errc::UnknownDomain, name);
  return *d;
}

const GateHandle* Runner::gate(DomainId id) const {
  auto it = gates_.find(id);
  return it == gates_.end() ? nullptr : &it->second;
}

Result<void> Runner::enter(DomainId id, std::uint64_t mod) {
  const GateHandle* g = gate(id);
  if (g == nullptr) return Error(Errc::UnknownDomain, "no gate for domain " + std::to_string(id));
  if (auto r = proc_.domains().enter(proc_.ctx, *g, mod); !r) return r;
  proc_.log.record(EventKind::DomEnter, id, {{"mod", hex(mod)}});
  return ok();
}

Result<void> Runner::exit_domain() {
  const DomainId from = proc_.ctx.curr_dom();
  if (auto r = proc_.domains().capac_exit(proc_.ctx); !r) return r;
  proc_.log.record(EventKind::DomExit, from);
  return ok();
}

Result<std::uint32_t> Runner::fd(std::string_view var) const {
  auto it = fds_.find(var);
  if (it == fds_.end()) return Error(Errc::ScenarioParseError, "unbound descriptor " + std::string(var));
  return it->second;
}

Result<PtrVar> Runner::ptr(std::string_view var) const {
  auto it = ptrs_.find(var);
  if (it == ptrs_.end()) return Error(Errc::ScenarioParseError, "unbound pointer " + std::string(var));
  return it->second;
}

Result<instr::MirModule> Runner::program(std::string_view file) const {
  auto it = sc_->programs.find(std::string(file));
  if (it != sc_->programs.end()) return *it->second;
  auto prog = load_program(sc_->base_dir / file);
  if (!prog) return prog.error();
  return std::move(prog->second);
}

Result<SignedValue64> Runner::load_ptr(const PtrVar& v, std::string_view site) {
  auto raw = proc_.mem.load_u64(SignedValue64(v.slot));
  if (!raw) return raw.error();
  const SignedValue64 s(*raw);
  const SignedValue64 p = v.sensitive ? pac_auth(s, proc_.ctx.active_db(), proc_.ctx.mod_reg())
                                      : pac_auth(s, proc_.ctx.active_da(), 0);
  proc_.log.record(EventKind::PtrAuth, proc_.ctx.curr_dom(),
                   {{"key", v.sensitive ? "DB" : "DA"},
                    {"ptr", hex(s.raw())},
                    {"ok", p.has_pac() ? "0" : "1"},
                    {"site", std::string(site)}});
  return p;
}

Result<std::uint64_t> Runner::new_slot() {
  const std::uint64_t at = kSlotBase + 8 * next_slot_;
  if (at + 8 > ProcessLayout::kDataBase + ProcessLayout::kDataSize) {
    return Error(Errc::OutOfMemory, "pointer slots exhausted");
  }
  ++next_slot_;
  return at;
}

Result<void> Runner::step() {
  if (done()) return ok();
  const Statement& s = sc_->statements[pc_];
  auto r = exec(s);
  ++pc_;
  return r;
}

Result<void> Runner::run_to(std::string_view mark) {
  if (!sc_->has_mark(mark)) return Error(Errc::ScenarioParseError, "no mark " + std::string(mark));
  while (!done()) {
    const Statement& s = sc_->statements[pc_];
    const bool hit = s.verb == "mark" && s.args[0] == mark;
    if (auto r = step(); !r) return r;
    if (hit) return ok();
  }
  return ok();
}

Result<void> Runner::run_all() {
  while (!done()) {
    if (auto r = step(); !r) return r;
  }
  return ok();
}

Result<void> Runner::exec(const Statement& s) {
  const auto& a = s.args;
  const std::string& v = s.verb;
  auto n = [&](std::size_t i) { return parse_number(a[i]).value(); };
  auto* log = &proc_.log;
  auto& ctx = proc_.ctx;
  auto& dm = proc_.domains();
  auto& k = proc_.kernel;

  if (v == "domain") {
    auto d = dm.register_domain(a[0], static_cast<DomainId>(n(1)));
    if (!d) return d.error();
    auto g = dm.mint_gate(d->id);
    if (!g) return g.error();
    domains_[a[0]] = d->id;
    gates_.emplace(d->id, *g);
    return ok();
  }
  if (v == "file") {
    auto r = k.create_file(a[0], bytes_of(join_from(a, 1)));
    if (!r) return r.error();
    return ok();
  }
  if (v == "symlink") return k.create_symlink(a[0], a[1]);
  if (v == "assign") {
    auto d = domain_arg(a[1]);
    if (!d) return d.error();
    assignments_.push_back({a[0], *d});
    return ok();
  }
  if (v == "init") {
    if (auto r = k.capac_init(assignments_); !r) return r;
    dm.seal();
    return ok();
  }
  if (v == "enter") {
    auto d = domain_arg(a[0]);
    if (!d) return d.error();
    return enter(*d, a.size() > 1 ? n(1) : 0);
  }
  if (v == "exit") return exit_domain();
  if (v == "open") {
    auto f = k.sys_open(ctx, a[1], log);
    if (!f) return f.error();
    fds_[a[0]] = f->raw();
    return ok();
  }
  if (v == "socket") {
    auto f = k.sys_socket(ctx, log);
    if (!f) return f.error();
    fds_[a[0]] = f->raw();
    return ok();
  }
  if (v == "close") return k.sys_close(ctx, fd(a[0]).value(), log);
  if (v == "listen") return k.sys_listen(ctx, fd(a[0]).value(), log);
  if (v == "connect") {
    return k.inject_connection(SignedFd(fd(a[0]).value()).fd_num(), bytes_of(join_from(a, 1)));
  }
  if (v == "accept") {
    auto f = k.sys_accept(ctx, fd(a[0]).value(), log);
    if (!f) return f.error();
    fds_[a[1]] = f->raw();
    return ok();
  }
  if (v == "limit") {
    auto f = k.capac_limit_fd(ctx, fd(a[0]).value(), parse_caps(a[1]).value(), log);
    if (!f) return f.error();
    fds_[a[0]] = f->raw();
    return ok();
  }
  if (v == "delegate_fd") {
    auto d = domain_arg(a[2]);
    if (!d) return d.error();
    const std::uint8_t mask = a.size() > 4 ? parse_caps(a[4]).value() : kCapFieldMask;
    auto f = k.capac_delegate_fd(ctx, fd(a[0]).value(), *d, n(3), mask, log);
    if (!f) return f.error();
    fds_[a[1]] = f->raw();
    return ok();
  }
  if (v == "read" || v == "write") {
    const PtrVar p = ptr(a[1]).value();
    auto raw = proc_.mem.load_u64(SignedValue64(p.slot));
    if (!raw) return raw.error();
    const PointerArg buf{SignedValue64(*raw), p.sensitive};
    auto r = v == "read" ? k.sys_read(ctx, proc_.mem, fd(a[0]).value(), buf, n(2), log)
                         : k.sys_write(ctx, proc_.mem, fd(a[0]).value(), buf, n(2), log);
    if (!r) return r.error();
    return ok();
  }
  if (v == "malloc" || v == "amalloc") {
    const bool priv = v == "malloc";
    auto block = priv ? capac_malloc(ctx, dm, proc_.mem, proc_.heap, n(1), log)
                      : ambient_malloc(proc_.mem, proc_.heap, n(1), ctx.curr_dom(), log);
    if (!block) return block.error();
    auto sig = priv ? pac_sign(*block, ctx.active_db(), ctx.mod_reg())
                    : pac_sign(SignedValue64(block->raw() & kTagClearMask), ctx.active_da(), 0);
    if (!sig) return sig.error();
    auto slot = new_slot();
    if (!slot) return slot.error();
    if (auto w = proc_.mem.store_u64(SignedValue64(*slot), sig->raw()); !w) return w;
    log->record(EventKind::PtrSign, ctx.curr_dom(),
                {{"key", priv ? "DB" : "DA"}, {"ptr", hex(sig->raw())}, {"site", v}});
    ptrs_[a[0]] = PtrVar{*slot, n(1), priv};
    return ok();
  }
  if (v == "free") {
    const PtrVar pv = ptr(a[0]).value();
    auto p = load_ptr(pv, "free");
    if (!p) return p.error();
    return pv.sensitive ? capac_free(ctx, dm, proc_.mem, proc_.heap, *p, log)
                        : ambient_free(proc_.mem, proc_.heap, *p, ctx.curr_dom(), log);
  }
  if (v == "load" || v == "store") {
    const PtrVar pv = ptr(a[0]).value();
    auto p = load_ptr(pv, v);
    if (!p) return p.error();
    const SignedValue64 at = p->offset(static_cast<std::int64_t>(n(1)));
    if (v == "store") return proc_.mem.store_u64(at, n(2));
    auto val = proc_.mem.load_u64(at);
    if (!val) return val.error();
    outputs_.push_back(*val);
    log->record(EventKind::Output, ctx.curr_dom(), {{"value", hex(*val)}});
    return ok();
  }
  if (v == "delegate_ptr") {
    const PtrVar pv = ptr(a[0]).value();
    auto d = domain_arg(a[2]);
    if (!d) return d.error();
    return capac_delegate_ptr(ctx, dm, proc_.mem, &proc_.heap, SignedValue64(pv.slot), n(1), *d, n(3), log);
  }
  if (v == "frame_enter") {
    auto f = enter_private_frame(ctx, dm, proc_.mem, proc_.stack, n(0));
    if (!f) return f.error();
    frames_.push_back(*f);
    return ok();
  }
  if (v == "frame_exit") {
    if (frames_.empty()) return Error(Errc::NotInDomain, "no private frame");
    const StackFrame f = frames_.back();
    frames_.pop_back();
    return exit_private_frame(ctx, dm, proc_.mem, proc_.stack, f);
  }
  if (v == "exec") {
    const auto& mod = *sc_->programs.at(a[0]);
    std::vector<std::uint64_t> args;
    for (std::size_t i = 2; i < a.size(); ++i) args.push_back(n(i));
    instr::Interpreter interp(mod, proc_);
    auto r = interp.call(a[1], args);
    outputs_.insert(outputs_.end(), interp.outputs().begin(), interp.outputs().end());
    if (!r) return r.error();
    return ok();
  }
  if (v == "mark") return ok();
  return Error(Errc::ScenarioParseError, "unhandled verb " + v);
}

RunResult run_scenario(const Scenario& sc, const RunOptions& opts) {
  Runner r(std::make_shared<const Scenario>(sc), opts);
  RunResult out;
  auto res = r.run_all();
  if (!res) {
    const Statement& st = sc.statements[r.pc() - 1];
    r.proc().log.record(EventKind::Fault, r.proc().ctx.curr_dom(),
                        {{"what", std::string(errc_name(res.error().code))},
                         {"line", std::to_string(st.line)},
                         {"stmt", st.verb}});
    out.fault = res.error();
    out.exit_status = 2;
  }
  out.log = r.proc().log;
  out.counters = out.log.counters();
  out.outputs = r.outputs();
  return out;
}

Result<RunResult> run_scenario(const std::filesystem::path& path, const RunOptions& opts) {
  auto sc = load_scenario(path);
  if (!sc) return sc.error();
  return run_scenario(*sc, opts);
}

}  // namespace capac::harness
