#include <random>

#include "capac/instr/globals.hpp"
#include "capac/instr/hir.hpp"
#include "capac/instr/interp.hpp"
#include "capac/instr/pass.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using namespace capac;
using namespace capac::instr;

namespace {

const std::filesystem::path kFixtures = CAPAC_FIXTURES;
const std::filesystem::path kGolden = CAPAC_GOLDEN;

MirModule parse_fixture(const std::filesystem::path& p) {
  auto m = parse_mir(oracle::read_text(p));
  REQUIRE_MESSAGE(m.ok(), p.filename().string() << ": " << (m ? "" : m.error().to_string()));
  return *m;
}

MirFunction one(std::string_view text) {
  auto m = parse_mir(text);
  REQUIRE_MESSAGE(m.ok(), (m ? "" : m.error().to_string()));
  return m->functions.at(0);
}

bool has_op(const MirFunction& f, Op op) {
  for (const auto& i : f.body) {
    if (i.synthetic && i.op == op) return true;
  }
  return false;
}

}  // namespace

TEST_SUITE("mir") {
  TEST_CASE("print/parse round trip over the fixture corpus") {
    for (const auto& p : oracle::files_in(kFixtures / "mir", ".mir")) {
      const MirModule m = parse_fixture(p);
      const std::string once = print_module(m);
      auto again = parse_mir(once);
      REQUIRE(again.ok());
      CHECK_MESSAGE(print_module(*again) == once, p.filename().string());
      auto inst = instrument(m);
      REQUIRE(inst.ok());
      const std::string listing = print_module(*inst);
      auto reparsed = parse_mir(listing);
      REQUIRE(reparsed.ok());
      CHECK(print_module(*reparsed) == listing);
    }
  }

  TEST_CASE("parse errors carry a line") {
    auto bad = parse_mir("func f {\n  frob x1\n}\n");
    REQUIRE_FALSE(bad.ok());
    CHECK(bad.error().code == Errc::ParseError);
    CHECK_FALSE(parse_mir("func f frame=1 {\n  ldr x0, [fi#3]\n}\n").ok());
  }
}

TEST_SUITE("liveness") {
  TEST_CASE("pass trace equals the reference transcription on every fixture") {
    int functions = 0, sensitive = 0;
    for (const auto& p : oracle::files_in(kFixtures / "mir", ".mir")) {
      for (const auto& f : parse_fixture(p).functions) {
        auto lr = analyze_pointer_liveness(f);
        REQUIRE(lr.ok());
        const auto ref = oracle::alg1(f);
        REQUIRE(ref.p_after.size() == lr->trace.size());
        for (std::size_t i = 0; i < ref.p_after.size(); ++i) {
          CHECK_MESSAGE(format_pointer_set(lr->trace[i]) == ref.p_after[i],
                        p.filename().string() << " " << f.name << " @" << i << ": " << print_instr(f.body[i]));
        }
        CHECK(lr->S == ref.S);
        for (std::size_t i = 0; i < f.body.size(); ++i) {
          CHECK(static_cast<int>(lr->access[i]) == ref.kind[i]);
        }
        ++functions;
        sensitive += oracle::has_sensitive_spill_reload(f, ref);
      }
    }
    CHECK(functions >= 20);
    CHECK(sensitive >= 5);
  }

  TEST_CASE("generated programs agree with the reference") {
    for (std::uint64_t s = 0; s < 40; ++s) {
      const auto f = one(oracle::generate_program(s));
      auto lr = analyze_pointer_liveness(f);
      REQUIRE(lr.ok());
      const auto ref = oracle::alg1(f);
      for (std::size_t i = 0; i < ref.p_after.size(); ++i) {
        REQUIRE_MESSAGE(format_pointer_set(lr->trace[i]) == ref.p_after[i], "seed " << s << " @" << i);
      }
    }
  }

  TEST_CASE("spilled sensitive pointer stays in P until overwritten by an integer") {
    const auto f = one(R"(func f frame=2 {
  bl capac_malloc(x0)
  str x0, [fi#0] spill
  movi x1, #3
  str x1, [fi#0] spill
  ret
})");
    auto lr = analyze_pointer_liveness(f).value();
    CHECK(format_pointer_set(lr.trace[1]) == "{x0:s, fi#0:s}");
    CHECK(format_pointer_set(lr.trace[2]) == "{x0:s, fi#0:s}");
    CHECK(format_pointer_set(lr.trace[3]) == "{x0:s}");
    CHECK(lr.access[1] == Access::Sensitive);
    CHECK(lr.access[3] == Access::None);
  }

  TEST_CASE("reserved registers are rejected") {
    for (const char* r : {"x16", "x17", "x24", "x25"}) {
      const auto f = one(std::string("func f frame=1 {\n  movi ") + r + ", #1\n  ret\n}\n");
      auto lr = analyze_pointer_liveness(f);
      REQUIRE_FALSE(lr.ok());
      CHECK(lr.error().code == Errc::LoweringError);
    }
  }

  TEST_CASE("an !int annotation on a pointer access is a contradiction") {
    const auto f = one("func f frame=1 {\n  bl malloc(x0)\n  str x0, [fi#0] spill !int\n  ret\n}\n");
    auto lr = analyze_pointer_liveness(f);
    REQUIRE_FALSE(lr.ok());
    CHECK(lr.error().code == Errc::LoweringError);
    CHECK(oracle::alg1(f).contradiction);
  }
}

TEST_SUITE("instrument") {
  TEST_CASE("sensitive and ambient spill shapes") {
    const auto f = one(R"(func f frame=2 {
  bl capac_malloc(x0)
  str x0, [fi#0] spill
  bl malloc(x0)
  str x0, [fi#1] spill
  ldr x1, [fi#0] reload
  ldr x2, [fi#1] reload
  bl emit(x1)
  bl emit(x2)
  ret
})");
    const auto out = liveness_instrument(f).value();
    const auto ops = synthetic_ops(out);
    const std::vector<Op> want{Op::FmovFromMod, Op::Pacdb, Op::Xpac, Op::And, Op::Pacdza, Op::FmovFromMod, Op::Autdb, Op::Autdza};
    CHECK(ops == want);
  }

  TEST_CASE("base equal to data register goes through the split scratch") {
    const auto f = one("func f frame=1 {\n  bl malloc(x0)\n  str x0, [x0] !ptr\n  ret\n}\n");
    const auto out = liveness_instrument(f).value();
    CHECK(has_op(out, Op::Mov));
    bool rebased = false;
    for (const auto& i : out.body) rebased |= (!i.synthetic && i.is_store() && i.mem.base == kSplitScratch);
    CHECK(rebased);
  }

  TEST_CASE("auditor passes the corpus and flags a removed authentication") {
    for (const auto& p : oracle::files_in(kFixtures / "mir", ".mir")) {
      for (const auto& f : parse_fixture(p).functions) {
        auto lr = analyze_pointer_liveness(f).value();
        auto out = instrument(f).value();
        CHECK_MESSAGE(audit(out, lr).empty(), p.filename().string() << " " << f.name);
        for (std::size_t i = 0; i < out.body.size(); ++i) {
          if (out.body[i].op == Op::Autdb || out.body[i].op == Op::Autdza) {
            auto broken = out;
            broken.body.erase(broken.body.begin() + static_cast<std::ptrdiff_t>(i));
            CHECK_FALSE(audit(broken, lr).empty());
            break;
          }
        }
      }
    }
  }

  TEST_CASE("private frame golden shape") {
    auto hir = parse_hir(oracle::read_text(kFixtures / "hir" / "code_example.hir")).value();
    auto inst = instrument(lower(hir).value()).value();
    CHECK(print_module(inst) == oracle::read_text(kGolden / "code_example.instr.s"));

    const auto ops = synthetic_ops(*inst.find("encrypt"));
    const std::vector<Op> prologue{Op::LdrCurrDom, Op::LdrDst, Op::Autdzb, Op::Cmp, Op::BNe,
                                   Op::Lsl, Op::FmovToTag, Op::FmovFromTag, Op::Mov, Op::Orr};
    REQUIRE(ops.size() > prologue.size());
    CHECK(std::vector<Op>(ops.begin(), ops.begin() + static_cast<std::ptrdiff_t>(prologue.size())) == prologue);
    CHECK(ops[prologue.size()] == Op::Stg);
    CHECK(ops.back() == Op::Brk);
    CHECK(ops[ops.size() - 2] == Op::ClearTag);
    CHECK(ops[ops.size() - 3] == Op::Stzg);
  }
}

TEST_SUITE("interp") {
  TEST_CASE("instrumented fixtures produce the uninstrumented outputs") {
    for (const auto& p : oracle::files_in(kFixtures / "mir", ".mir")) {
      const MirModule plain = parse_fixture(p);
      const MirModule inst = instrument(plain).value();
      const auto a = oracle::run_in_domain(plain);
      const auto b = oracle::run_in_domain(inst);
      CHECK_MESSAGE(!a.error, p.filename().string() << ": " << (a.error ? a.error->to_string() : ""));
      CHECK_MESSAGE(!b.error, p.filename().string() << ": " << (b.error ? b.error->to_string() : ""));
      CHECK(!a.outputs.empty());
      CHECK(a.outputs == b.outputs);
    }
  }

  TEST_CASE("generated programs") {
    for (std::uint64_t s = 100; s < 130; ++s) {
      auto plain = parse_mir(oracle::generate_program(s)).value();
      auto inst = instrument(plain).value();
      const auto a = oracle::run_in_domain(plain);
      const auto b = oracle::run_in_domain(inst);
      REQUIRE_MESSAGE(!b.error, "seed " << s << ": " << (b.error ? b.error->to_string() : ""));
      CHECK(a.outputs == b.outputs);
    }
  }

  TEST_CASE("private function called outside a domain fails domain authentication") {
    const auto m = instrument(parse_fixture(kFixtures / "mir" / "10_dom_priv_stack.mir")).value();
    VirtualProcess p(3);
    REQUIRE(p.domains().register_domain("d", 1).ok());
    p.domains().seal();
    Interpreter in(m, p);
    auto r = in.call("main");
    REQUIRE_FALSE(r.ok());
    CHECK(r.error().code == Errc::DomainAuthFailure);
  }

  TEST_CASE("private frame is scrubbed on return") {
    const auto m = instrument(parse_fixture(kFixtures / "mir" / "10_dom_priv_stack.mir")).value();
    const auto run = oracle::run_in_domain(m);
    REQUIRE_FALSE(run.error);
    REQUIRE(run.outputs == std::vector<std::uint64_t>{55});
    VirtualProcess p(11);
    (void)p.domains().register_domain("d", 1);
    auto g = p.domains().mint_gate(1).value();
    p.domains().seal();
    REQUIRE(p.domains().enter(p.ctx, g, 0x55).ok());
    Interpreter in(m, p);
    REQUIRE(in.call("main").ok());
    const std::uint64_t lo = p.stack.base() + p.stack.length() - 256;
    for (std::uint64_t a = lo; a < p.stack.base() + p.stack.length(); a += 16) {
      CHECK(p.mem.granule_tag(a).value() == 0);
    }
    CHECK(p.ctx.tag_reg() == 0);
  }

  TEST_CASE("corrupting a signed spill slot is detected") {
    const auto m = instrument(parse_fixture(kFixtures / "mir" / "01_spill_reload_sensitive.mir")).value();
    std::mt19937_64 rng(5);
    int pac_flips = 0, pac_detected = 0, addr_flips = 0, addr_missed = 0;
    for (int trial = 0; trial < 400; ++trial) {
      const bool pac_field = trial % 2 == 0;
      const unsigned bit = pac_field ? 48 + static_cast<unsigned>(rng() % 7) : 4 + static_cast<unsigned>(rng() % 20);
      InterpOptions o;
      bool done = false;
      o.before_load = [&](VirtualProcess& proc, const MirFunction& f, std::size_t pc, std::uint64_t addr) {
        if (done || f.body[pc].synthetic || !f.body[pc].mem.frame || !f.body[pc].reload) return;
        auto v = proc.mem.load_u64(SignedValue64(addr)).value();
        (void)proc.mem.store_u64(SignedValue64(addr), v ^ (1ULL << bit));
        done = true;
      };
      const auto r = oracle::run_in_domain(m, 11, 0x55, o);
      REQUIRE(done);
      if (pac_field) {
        ++pac_flips;
        pac_detected += r.error.has_value();
      } else {
        ++addr_flips;
        addr_missed += !r.error.has_value();
      }
    }
    CHECK(pac_detected == pac_flips);
    const double p = 1.0 / 128;
    CHECK(addr_missed <= addr_flips * p + 3 * std::sqrt(addr_flips * p * (1 - p)));
  }
}

TEST_SUITE("hir") {
  const char* kTaint = R"(
type pair = struct{ptr(int), int}
func f(%a: ptr(pair) dom_priv, %b: ptr(pair)) {
  %x = field %a, 0
  %y = load %x
  %z = field %b, 0
  %w = load %z
  %m = call capac_malloc(%w) : ptr(int)
  %n = add %m, 8
  %c = const 5
  store %n, %z
  ret
}
)";

  TEST_CASE("taint follows def-use chains and store destinations") {
    auto m = parse_hir(kTaint).value();
    const auto t = taint_analyze(m.functions[0]);
    for (std::string v : {"a", "x", "y", "m", "n", "z", "w"}) CHECK_MESSAGE(t.sensitive.count(v), v);
    for (std::string v : {"b", "c"}) CHECK_MESSAGE(!t.sensitive.count(v), v);
  }

  TEST_CASE("taint is monotone in the source set") {
    auto m = parse_hir(kTaint).value();
    auto f = m.functions[0];
    const auto base = taint_analyze(f);
    f.params[1].dom_priv = true;
    const auto more = taint_analyze(f);
    for (const auto& v : base.sensitive) CHECK(more.sensitive.count(v));
    CHECK(more.sensitive.count("b"));
  }

  TEST_CASE("pointer null checks are rewritten and integer ones are not") {
    auto m = parse_hir(R"(
func f(%p: ptr(int), %i: int) {
  brnull %p, a, b
a:
  brnull %i, b, b
b:
  ret
}
)").value();
    const auto r = rewrite_null_checks(m.functions[0], m.types);
    CHECK(r.body[0].aut_null);
    CHECK_FALSE(r.body[2].aut_null);
    const auto twice = rewrite_null_checks(r, m.types);
    CHECK(print_hir(twice) == print_hir(r));
  }

  TEST_CASE("a failed-auth null takes the null branch") {
    auto m = parse_hir(R"(
func main() {
  %z = const 0 : ptr(int)
  brnull %z, isnull, notnull
isnull:
  %one = const 1
  emit %one
  ret
notnull:
  %two = const 2
  emit %two
  ret
}
)").value();
    auto low = lower(m).value();
    auto inst = instrument(low).value();
    CHECK(oracle::run_in_domain(inst).outputs == std::vector<std::uint64_t>{1});
    // The rewritten check also accepts the corruption pattern of null.
    bool compares = false;
    for (const auto& i : low.functions[0].body) compares |= i.op == Op::Movi && static_cast<std::uint64_t>(i.imm) == kAutNull;
    CHECK(compares);
  }

  TEST_CASE("code example lowers and runs the same instrumented") {
    auto hir = parse_hir(oracle::read_text(kFixtures / "hir" / "code_example.hir")).value();
    auto plain = lower(hir).value();
    auto inst = instrument(plain).value();
    const auto a = oracle::run_in_domain(plain);
    const auto b = oracle::run_in_domain(inst, 11, 77);
    REQUIRE_FALSE(b.error);
    const std::vector<std::uint64_t> want{0x1110, 0x2220, 0x3330, 0x4440};
    CHECK(a.outputs == want);
    CHECK(b.outputs == want);
  }
}

TEST_SUITE("globals") {
  TEST_CASE("sign sites match the type-tree walker") {
    int shapes = 0;
    for (const auto& p : oracle::files_in(kFixtures / "globals", ".hir")) {
      const std::string text = oracle::read_text(p);
      const std::string expect = text.substr(9, text.find('\n') - 9);
      auto m = parse_hir(text).value();
      long walker = 0;
      for (const auto& g : m.globals) {
        const long c = oracle::count_pointer_slots(m.types, g.type, kGlobalCtorDepth);
        walker = (walker < 0 || c < 0) ? -1 : walker + c;
      }
      auto ctor = generate_global_ctors(m.globals, m.types);
      if (expect == "cyclic") {
        CHECK(walker < 0);
        REQUIRE_FALSE(ctor.ok());
        CHECK(ctor.error().code == Errc::CyclicTypeError);
      } else {
        REQUIRE_MESSAGE(ctor.ok(), p.filename().string());
        CHECK_MESSAGE(static_cast<long>(ctor->sites.size()) == walker, p.filename().string());
        CHECK_MESSAGE(static_cast<long>(ctor->sites.size()) == std::stol(expect), p.filename().string());
      }
      ++shapes;
    }
    CHECK(shapes >= 10);
  }

  TEST_CASE("runtime constructor signs through allocated objects and skips null") {
    auto m = parse_hir("global p : ptr(struct{ptr(int), int})\nglobal q : ptr(int)\n").value();
    auto ctor = generate_global_ctors(m.globals, m.types).value();
    auto layout = layout_globals(m.globals, m.types).value();
    REQUIRE(ctor.sites.size() == 3);

    VirtualProcess proc(9);
    auto inner = ambient_malloc(proc.mem, proc.heap, 16).value();
    auto leaf = ambient_malloc(proc.mem, proc.heap, 8).value();
    REQUIRE(proc.mem.store_u64(inner, leaf.raw()).ok());
    REQUIRE(proc.mem.store_u64(SignedValue64(layout.address.at("p")), inner.raw()).ok());
    CHECK(run_global_ctors(ctor, layout, proc).value() == 3);

    const PaKey& da = proc.ctx.active_da();
    auto sp = SignedValue64(proc.mem.load_u64(SignedValue64(layout.address.at("p"))).value());
    CHECK(pac_auth(sp, da, 0) == inner);
    auto sl = SignedValue64(proc.mem.load_u64(inner).value());
    CHECK(pac_auth(sl, da, 0) == leaf);
    CHECK(proc.log.counters().pac_da == 3);
    CHECK(pac_auth(SignedValue64(proc.mem.load_u64(SignedValue64(layout.address.at("q"))).value()), da, 0).raw() == 0);

    VirtualProcess empty(9);
    CHECK(run_global_ctors(ctor, layout, empty).value() == 2);  // p is null, its pointee is skipped
  }
}
