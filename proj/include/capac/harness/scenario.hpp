#pragma once

// Scenario DSL: one statement per line, `#` comments, `$name` variables.
//
//   domain NAME ID                 register a domain and mint its gate
//   file PATH [TEXT...]            create a file
//   symlink LINK TARGET
//   assign PATH DOMAIN             owner for capac_init
//   init                           capac_init + seal the registry
//   enter DOMAIN [MOD] | exit
//   open $FD PATH | close $FD | limit $FD CAPS
//   read $FD $PTR N | write $FD $PTR N
//   delegate_fd $FD $NEW DOMAIN MOD [CAPS]
//   socket $FD | listen $FD | connect $FD TEXT... | accept $FD $NEW
//   malloc $P N                    capac_malloc, pointer stored signed (DB)
//   amalloc $P N                   ambient malloc, pointer stored signed (DA)
//   free $P | load $P OFF | store $P OFF VALUE
//   delegate_ptr $P N DOMAIN MOD
//   frame_enter N | frame_exit
//   exec FILE FN [INT...]          run a .mir or .hir program, instrumented
//   mark NAME
//
// CAPS is a subset of "rwsd"; DOMAIN is a name or `ambient`.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "capac/instr/mir.hpp"
#include "capac/process.hpp"

namespace capac::harness {

struct Statement {
  int line = 0;
  std::string verb;
  std::vector<std::string> args;
};

struct Scenario {
  std::string name;
  std::filesystem::path base_dir;  // `exec` paths are relative to this
  std::vector<Statement> statements;
  /// Instrumented and plain programs referenced by `exec`, keyed by file.
  std::map<std::string, std::shared_ptr<const instr::MirModule>> programs;
  std::map<std::string, std::shared_ptr<const instr::MirModule>> plain_programs;

  bool has_mark(std::string_view m) const;
  /// Static census: statements per verb.
  std::size_t count(std::string_view verb) const;
};

Result<Scenario> parse_scenario(std::string_view text, const std::filesystem::path& base_dir = {},
                                std::string name = "scenario");
Result<Scenario> load_scenario(const std::filesystem::path& path);

struct RunOptions {
  std::uint64_t seed = 1;
  bool random_keys = false;
};

struct PtrVar {
  std::uint64_t slot = 0;  // where the signed pointer lives
  std::uint64_t size = 0;
  bool sensitive = false;  // DB-signed under the instance modifier
};

class Runner {
 public:
  Runner(std::shared_ptr<const Scenario> sc, const RunOptions& opts);

  Result<void> step();
  /// Runs through the statement `mark NAME`.
  Result<void> run_to(std::string_view mark);
  Result<void> run_all();
  bool done() const { return pc_ >= sc_->statements.size(); }
  std::size_t pc() const { return pc_; }

  VirtualProcess& proc() { return proc_; }
  const VirtualProcess& proc() const { return proc_; }
  const Scenario& scenario() const { return *sc_; }

  // Used by attack directives.
  std::optional<DomainId> domain(std::string_view name) const;
  const GateHandle* gate(DomainId id) const;
  Result<void> enter(DomainId id, std::uint64_t mod);
  Result<void> exit_domain();
  Result<std::uint32_t> fd(std::string_view var) const;
  Result<PtrVar> ptr(std::string_view var) const;
  /// Loads the pointer stored for `v` and authenticates it in the current
  /// context, logging PTR-AUTH.
  Result<SignedValue64> load_ptr(const PtrVar& v, std::string_view site = "load");
  /// Instrumented program, loaded relative to the scenario when not preloaded.
  Result<instr::MirModule> program(std::string_view file) const;
  const std::vector<std::uint64_t>& outputs() const { return outputs_; }

 private:
  Result<void> exec(const Statement& s);
  Result<std::uint64_t> new_slot();
  Result<DomainId> domain_arg(const std::string& name) const;

  std::shared_ptr<const Scenario> sc_;
  std::size_t pc_ = 0;
  VirtualProcess proc_;
  std::map<std::string, DomainId, std::less<>> domains_;
  std::map<DomainId, GateHandle> gates_;
  std::vector<FileAssignment> assignments_;
  std::map<std::string, std::uint32_t, std::less<>> fds_;
  std::map<std::string, PtrVar, std::less<>> ptrs_;
  std::vector<StackFrame> frames_;
  std::uint64_t next_slot_ = 0;
  std::vector<std::uint64_t> outputs_;
};

struct RunResult {
  EventLog log;
  EventCounters counters;
  std::optional<Error> fault;
  int exit_status = 0;
  std::vector<std::uint64_t> outputs;
};

RunResult run_scenario(const Scenario& sc, const RunOptions& opts = {});
Result<RunResult> run_scenario(const std::filesystem::path& path, const RunOptions& opts = {});

inline constexpr std::uint64_t kSlotBase = ProcessLayout::kDataBase + 0x8000;

Result<std::uint8_t> parse_caps(std::string_view s);
Result<std::uint64_t> parse_number(std::string_view s);

}  // namespace capac::harness
