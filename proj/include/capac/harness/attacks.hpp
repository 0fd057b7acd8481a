#pragma once

// Attack suites. A suite file names one requirement and lists directives:
//
//   suite R3
//   scenario security.scn          optional default scenario, relative to the suite
//   ReuseFdCrossDomain at=opened fd=$key in=web
//
// Every directive runs against a fresh copy of the scenario state taken at its
// `at=` mark.

#include <map>
#include <string>
#include <vector>

#include "capac/harness/scenario.hpp"

namespace capac::harness {

enum class AttackKind : std::uint8_t {
  ForgeFd,
  ReuseFdCrossDomain,
  ForgePtrTagOnly,
  ReusePtrCrossDomain,
  ImpersonateCurrDom,
  ReplayEntryToken,
  BruteForceFdPac,
  ReuseClosedFdNumber,
  ForgePathOpen,
  ForeignPathOpen,
  ForgeEntryToken,
  ImpersonatePathOpen,
  ImpersonateMalloc,
  DelegateNonOwnedFd,
  UnsignedFdSyscall,
  UnsignedPtrSyscall,
  CapEscalation,
  CorruptSpilledPtr,
  ReusePtrCrossInstance,
  ReuseFdAfterExit,
  ReuseDelegatedPtr,
  CorruptHeapPtr,
};

std::string_view attack_kind_name(AttackKind k);
std::optional<AttackKind> parse_attack_kind(std::string_view s);

struct Directive {
  int line = 0;
  AttackKind kind{};
  std::string at;
  std::map<std::string, std::string> params;

  std::string param(const std::string& key, const std::string& fallback = {}) const;
};

struct AttackSuite {
  std::string requirement;
  std::string scenario;
  std::vector<Directive> directives;
};

Result<AttackSuite> parse_attack_suite(std::string_view text);
Result<AttackSuite> load_attack_suite(const std::filesystem::path& path);

struct AttackOutcome {
  Directive directive;
  bool defended = false;  // the attack was stopped as expected
  std::string observed;   // e.g. "FdAuthDenied" or "grants 38/10000 <= 51"
};

struct SuiteReport {
  std::string requirement;
  std::vector<AttackOutcome> outcomes;

  bool all_defended() const;
  std::string format() const;
};

/// Fails only on setup errors (missing mark, unknown variable).
Result<SuiteReport> run_attack_suite(const Scenario& sc, const AttackSuite& suite,
                                     const RunOptions& opts = {});

Result<AttackOutcome> run_directive(const Runner& at_mark, const Directive& d, std::uint64_t seed);

/// Upper bound on grants among n uniform forgeries against a 2^-bits check.
double forgery_bound(std::uint64_t n, unsigned bits);

}  // namespace capac::harness
