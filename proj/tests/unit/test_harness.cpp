#include <set>
#include <sstream>

#include "capac/harness/attacks.hpp"
#include "capac/harness/scenario.hpp"
#include "capac/harness/selftest.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using namespace capac;
using namespace capac::harness;

namespace {

const std::filesystem::path kScenarios = CAPAC_SCENARIOS;
const std::filesystem::path kGolden = CAPAC_GOLDEN;

Errc parse_code(std::string_view text) {
  auto r = parse_scenario(text);
  REQUIRE_FALSE(r.ok());
  return r.error().code;
}

// Recount from the printed log, independent of EventLog::counters().
EventCounters recount(const std::string& text) {
  EventCounters c;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string evt, seq, kind, tok;
    ls >> evt >> seq >> kind;
    std::map<std::string, std::string> kv;
    while (ls >> tok) {
      const auto eq = tok.find('=');
      if (eq != std::string::npos) kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    if (kind == "DOM-ENTER") ++c.domain_switches;
    if (kind == "PATH-AUTH" || kind == "FD-AUTH") ++c.auth_syscalls;
    if (kind == "ALLOC" && kv.count("tag") && kv["tag"] != "0") ++c.private_allocs;
    if (kind == "PTR-SIGN") ++(kv["key"] == "DB" ? c.pac_db : c.pac_da);
    if (kind == "PTR-AUTH") ++(kv["key"] == "DB" ? c.aut_db : c.aut_da);
  }
  return c;
}

std::size_t count_kind(const EventLog& log, EventKind k) {
  std::size_t n = 0;
  for (const auto& e : log.events()) n += e.kind == k;
  return n;
}

}  // namespace

TEST_SUITE("scenario") {
  TEST_CASE("parse errors") {
    CHECK(parse_code("frobnicate x\n") == Errc::ScenarioParseError);
    CHECK(parse_code("domain a 1\nenter a\nread $nope $buf 4\n") == Errc::ScenarioParseError);
    CHECK(parse_code("mark m\nmark m\n") == Errc::ScenarioParseError);
    CHECK(parse_code("enter nowhere\n") == Errc::ScenarioParseError);
    CHECK(parse_code("malloc $p lots\n") == Errc::ScenarioParseError);
    CHECK(parse_code("open $f\n") == Errc::ScenarioParseError);
  }

  TEST_CASE("error reports the offending line") {
    auto r = parse_scenario("domain a 1\n\n# c\nbogus\n");
    REQUIRE_FALSE(r.ok());
    CHECK(r.error().detail.find("4") != std::string::npos);
  }

  TEST_CASE("number and caps parsing") {
    CHECK(parse_number("0x1f").value() == 31);
    CHECK(parse_number("17").value() == 17);
    CHECK_FALSE(parse_number("1z").ok());
    CHECK(parse_caps("rw").value() == (kCapRead | kCapWrite));
    CHECK(parse_caps("-").value() == 0);
    CHECK_FALSE(parse_caps("rx").ok());
  }

  TEST_CASE("empty scenario") {
    const auto r = run_scenario(parse_scenario("").value());
    CHECK(r.exit_status == 0);
    CHECK(r.log.size() == 0);
    CHECK(r.counters == EventCounters{});
  }

  TEST_CASE("same seed gives the same log, different seed different signatures") {
    const auto path = kScenarios / "webserver.scn";
    const auto a = run_scenario(path, {4, false}).value();
    const auto b = run_scenario(path, {4, false}).value();
    const auto c = run_scenario(path, {5, false}).value();
    CHECK(a.log.format() == b.log.format());
    CHECK(a.log.format() != c.log.format());
    CHECK(a.counters == c.counters);
    CHECK(c.exit_status == 0);
  }

  TEST_CASE("random keys still run cleanly") {
    const auto r = run_scenario(kScenarios / "webserver.scn", {0, true}).value();
    CHECK(r.exit_status == 0);
    CHECK_FALSE(r.fault);
  }

  TEST_CASE("counters equal an independent tally of the log") {
    for (const auto& p : oracle::files_in(kScenarios, ".scn")) {
      const auto r = run_scenario(p).value();
      CHECK_MESSAGE(recount(r.log.format()) == r.counters, p.filename().string());
    }
  }

  TEST_CASE("code example") {
    const auto r = run_scenario(kScenarios / "code_example.scn").value();
    REQUIRE(r.exit_status == 0);
    using K = EventKind;
    CHECK(oracle::ordered_subsequence(r.log.events(), {K::DomEnter, K::PathAuth, K::FdSign, K::Alloc, K::PtrSign,
                                                       K::FdAuth, K::PtrAuth, K::Output, K::DomExit}));
    CHECK(r.log.format() == oracle::read_text(kGolden / "code_example.log"));
    // "-----BEG" read from the key file, little endian.
    REQUIRE(r.outputs.size() == 1);
    CHECK(r.outputs[0] == 0x4745422d2d2d2d2dULL);
  }

  TEST_CASE("webserver runs to completion through three domains") {
    const auto sc = load_scenario(kScenarios / "webserver.scn").value();
    const auto r = run_scenario(sc);
    CHECK(r.exit_status == 0);
    CHECK_FALSE(r.fault);
    CHECK(count_kind(r.log, EventKind::Fault) == 0);
    const std::size_t delegations = sc.count("delegate_fd") + sc.count("delegate_ptr");
    CHECK(delegations == 3);
    CHECK(count_kind(r.log, EventKind::Delegate) == delegations);
    CHECK(r.counters.domain_switches >= 2);
    std::set<unsigned> doms;
    for (const auto& e : r.log.events()) {
      if (e.kind == EventKind::DomEnter) doms.insert(e.dom);
    }
    CHECK(doms == std::set<unsigned>{1, 2, 3});
    for (const char* m : {"ready", "accepted", "handshake_done", "session_live", "served"}) CHECK(sc.has_mark(m));
  }

  TEST_CASE("a fault stops the run with status 2") {
    const char* text = R"(domain a 1
domain b 2
file /k secret-bytes
assign /k a
init
enter a
open $k /k
exit
enter b
amalloc $buf 16
read $k $buf 4
mark unreachable
)";
    const auto r = run_scenario(parse_scenario(text).value());
    CHECK(r.exit_status == 2);
    REQUIRE(r.fault);
    CHECK(r.fault->code == Errc::FdAuthDenied);
    CHECK(r.log.events().back().kind == EventKind::Fault);
  }

  TEST_CASE("runner snapshots are independent") {
    auto sc = std::make_shared<const Scenario>(load_scenario(kScenarios / "security.scn").value());
    Runner r(sc, {});
    REQUIRE(r.run_to("crypto_live").ok());
    Runner copy = r;
    REQUIRE(copy.run_all().ok());
    CHECK(copy.done());
    CHECK_FALSE(r.done());
    CHECK(r.proc().ctx.curr_dom() == r.domain("crypto").value());
    CHECK(copy.proc().ctx.curr_dom() == 0);
  }
}

TEST_SUITE("attacks") {
  TEST_CASE("every shipped suite is defended and every kind is exercised") {
    std::set<AttackKind> seen;
    int suites = 0;
    for (const auto& p : oracle::files_in(kScenarios, ".atk")) {
      const auto su = load_attack_suite(p).value();
      REQUIRE_FALSE(su.scenario.empty());
      const auto sc = load_scenario(kScenarios / su.scenario).value();
      const auto rep = run_attack_suite(sc, su, {}).value();
      CHECK_MESSAGE(rep.all_defended(), rep.format());
      CHECK(rep.outcomes.size() == su.directives.size());
      for (const auto& d : su.directives) seen.insert(d.kind);
      ++suites;
    }
    CHECK(suites >= 4);
    for (int k = 0; k <= static_cast<int>(AttackKind::CorruptHeapPtr); ++k) {
      CHECK_MESSAGE(seen.count(static_cast<AttackKind>(k)), attack_kind_name(static_cast<AttackKind>(k)));
    }
  }

  TEST_CASE("benign controls are reported as breaches") {
    const auto sc = load_scenario(kScenarios / "security.scn").value();
    const auto su = parse_attack_suite(R"(suite CONTROL
ReuseFdCrossDomain at=crypto_live fd=$key in=crypto mod=7
ReuseFdCrossDomain at=crypto_live fd=$pubf in=web mod=7
)").value();
    const auto rep = run_attack_suite(sc, su, {}).value();
    REQUIRE(rep.outcomes.size() == 2);
    CHECK_FALSE(rep.outcomes[0].defended);
    CHECK_FALSE(rep.outcomes[1].defended);
    CHECK_FALSE(rep.all_defended());
    CHECK(rep.format().find("BREACHED") != std::string::npos);
  }

  TEST_CASE("suite parse errors") {
    CHECK_FALSE(parse_attack_suite("suite X\nNoSuchAttack at=m\n").ok());
    CHECK_FALSE(parse_attack_suite("suite X\nForgeFd\n").ok());
    const auto sc = load_scenario(kScenarios / "security.scn").value();
    const auto su = parse_attack_suite("suite X\nForgeFd at=missing_mark\n").value();
    CHECK_FALSE(run_attack_suite(sc, su, {}).ok());
  }

  TEST_CASE("forgery bound") {
    CHECK(forgery_bound(10000, 8) == doctest::Approx(10000.0 / 256 + 3 * std::sqrt(10000.0 / 256 * 255 / 256)));
  }

  TEST_CASE("selftest passes") {
    for (const auto& c : run_selftest(1, kScenarios)) CHECK_MESSAGE(c.pass, c.name << ": " << c.detail);
  }
}
