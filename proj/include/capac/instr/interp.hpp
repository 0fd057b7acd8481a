#pragma once

// Executes MIR on a VirtualProcess. Frame slots live on the process stack
// arena; pointer ops go through pa-emu and log PTR-SIGN / PTR-AUTH.
//
// Builtin callees: malloc(n), calloc(n, size), free(p), capac_malloc(n),
// capac_free(p), emit(v).

#include <cstdint>
#include <functional>
#include <vector>

#include "capac/instr/mir.hpp"
#include "capac/process.hpp"

namespace capac::instr {

struct InterpOptions {
  std::uint64_t step_limit = 1'000'000;
  /// Called before each ldr with the function, pc and effective address.
  std::function<void(VirtualProcess&, const MirFunction&, std::size_t, std::uint64_t)> before_load;
};

class Interpreter {
 public:
  Interpreter(const MirModule& module, VirtualProcess& proc, InterpOptions opts = {});

  /// Runs `fn` with x0.. set from `args`; returns x0.
  Result<std::uint64_t> call(std::string_view fn, const std::vector<std::uint64_t>& args = {});

  const std::vector<std::uint64_t>& outputs() const { return outputs_; }
  std::uint64_t steps() const { return steps_; }

 private:
  Result<void> run(const MirFunction& f);
  Result<bool> builtin(const std::string& name);
  Result<std::uint64_t> address(const MirFunction& f, const MemOperand& m) const;
  bool condition(Op op) const;
  const PaKey& key_for(Op op) const;

  const MirModule& module_;
  VirtualProcess& proc_;
  InterpOptions opts_;
  std::uint64_t x_[31] = {};
  std::uint64_t sp_ = 0;
  std::int64_t cmp_a_ = 0, cmp_b_ = 0;
  std::vector<std::uint64_t> outputs_;
  std::uint64_t steps_ = 0;
  int depth_ = 0;
};

}  // namespace capac::instr
