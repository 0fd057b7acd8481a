#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "capac/harness/attacks.hpp"
#include "capac/harness/scenario.hpp"
#include "capac/harness/selftest.hpp"
#include "capac/instr/hir.hpp"
#include "capac/instr/pass.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitMismatch = 1;
constexpr int kExitFault = 2;
constexpr int kExitParse = 3;
constexpr int kExitBreach = 4;

int parse_failure(const capac::Error& e) {
  std::cerr << "parse error: " << e.to_string() << "\n";
  return kExitParse;
}

int cmd_run(const std::string& path, std::uint64_t seed, bool random_keys, const std::string& counters_json) {
  auto sc = capac::harness::load_scenario(path);
  if (!sc) return parse_failure(sc.error());
  const auto res = capac::harness::run_scenario(*sc, {seed, random_keys});
  std::cout << res.log.format();
  if (!counters_json.empty()) {
    std::ofstream out(counters_json);
    out << res.counters.to_json() << "\n";
  }
  if (res.fault) std::cerr << "fault: " << res.fault->to_string() << "\n";
  return res.exit_status;
}

int cmd_attack(const std::string& scn, const std::string& suite_path, std::uint64_t seed) {
  auto sc = capac::harness::load_scenario(scn);
  if (!sc) return parse_failure(sc.error());
  auto suite = capac::harness::load_attack_suite(suite_path);
  if (!suite) return parse_failure(suite.error());
  auto rep = capac::harness::run_attack_suite(*sc, *suite, {seed, false});
  if (!rep) {
    std::cerr << "suite setup failed: " << rep.error().to_string() << "\n";
    return rep.error().code == capac::Errc::ScenarioParseError ? kExitParse : kExitFault;
  }
  std::cout << rep->format();
  return rep->all_defended() ? kExitOk : kExitBreach;
}

std::string slurp(const std::string& path, bool& ok) {
  std::ifstream in(path);
  ok = static_cast<bool>(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cmd_instr(const std::string& path, const std::string& golden) {
  bool readable = false;
  const std::string text = slurp(path, readable);
  if (!readable) return parse_failure(capac::Error(capac::Errc::ParseError, "cannot read " + path));
  capac::Result<capac::instr::MirModule> plain = capac::Error(capac::Errc::ParseError);
  if (path.size() > 4 && path.substr(path.size() - 4) == ".hir") {
    auto hir = capac::instr::parse_hir(text);
    if (!hir) return parse_failure(hir.error());
    plain = capac::instr::lower(*hir);
  } else {
    plain = capac::instr::parse_mir(text);
  }
  if (!plain) return parse_failure(plain.error());
  auto inst = capac::instr::instrument(*plain);
  if (!inst) {
    std::cerr << "instrumentation failed: " << inst.error().to_string() << "\n";
    return kExitParse;
  }
  const std::string listing = capac::instr::print_module(*inst);
  std::cout << listing;
  if (golden.empty()) return kExitOk;
  const std::string expected = slurp(golden, readable);
  if (!readable) return parse_failure(capac::Error(capac::Errc::ParseError, "cannot read " + golden));
  if (expected != listing) {
    std::cerr << "output differs from " << golden << "\n";
    return kExitMismatch;
  }
  return kExitOk;
}

int cmd_selftest(std::uint64_t seed, const std::string& dir) {
  bool all = true;
  for (const auto& c : capac::harness::run_selftest(seed, dir)) {
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << " : " << c.detail << "\n";
    all = all && c.pass;
  }
  return all ? kExitOk : kExitBreach;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Emulated pointer-authentication capability runtime"};
  app.require_subcommand(1);

  std::uint64_t seed = 1;
  bool random_keys = false;
  std::string scenario, suite, counters_json, ir, golden, scenario_dir;
#ifdef CAPAC_SCENARIO_DIR
  scenario_dir = CAPAC_SCENARIO_DIR;
#endif

  auto* run = app.add_subcommand("run", "Execute a scenario and print its event log");
  run->add_option("scenario", scenario)->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Key seed");
  run->add_option("--counters-json", counters_json, "Write counters to this file");
  run->add_flag("--random-keys", random_keys, "Draw keys from the OS entropy source");

  auto* attack = app.add_subcommand("attack", "Run an attack suite against a scenario");
  attack->add_option("scenario", scenario)->required()->check(CLI::ExistingFile);
  attack->add_option("suite", suite)->required()->check(CLI::ExistingFile);
  attack->add_option("--seed", seed, "Key seed");

  auto* instr = app.add_subcommand("instr", "Instrument a .mir or .hir file and print the result");
  instr->add_option("ir", ir)->required()->check(CLI::ExistingFile);
  instr->add_option("--golden", golden, "Compare against this listing");

  auto* self = app.add_subcommand("selftest", "Run the property checks and shipped attack suites");
  self->add_option("--seed", seed, "Key seed");
  self->add_option("--scenarios", scenario_dir, "Directory holding *.atk suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitParse;
  }

  if (*run) return cmd_run(scenario, seed, random_keys, counters_json);
  if (*attack) return cmd_attack(scenario, suite, seed);
  if (*instr) return cmd_instr(ir, golden);
  return cmd_selftest(seed, scenario_dir);
}
