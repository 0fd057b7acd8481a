#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace capac {

/// Every failure the emulator can report. Hardware faults and monitor denials
/// share one enum so the harness can log and classify them uniformly.
enum class Errc : std::uint8_t {
  // pa-emu faults
  TagMismatch,
  PacAuthFailure,
  SegmentationOnCorruptPac,
  OutOfBounds,
  Unmapped,
  UnalignedAddress,
  SignAlreadySigned,
  // domain
  DuplicateId,
  AfterInitSealed,
  EntryDenied,
  NestedEntry,
  UnknownDomain,
  NotInDomain,
  DomainAuthFailure,
  ProcessTerminated,
  // refmon
  PathAuthDenied,
  PathResolutionError,
  FdRangeExceeded,
  FdAuthDenied,
  FdCapDenied,
  FdReserved,
  WouldBlock,
  // memiso
  OutOfMemory,
  InvalidFree,
  PtrAuthDenied,
  // instr
  LoweringError,
  CyclicTypeError,
  ParseError,
  ExecutionLimit,
  // harness
  ScenarioParseError,
};

std::string_view errc_name(Errc code);

/// A fault or denial. Faults are values; nothing in the library throws them.
struct Error {
  Errc code;
  std::uint64_t address = 0;
  std::string detail;

  Error(Errc c, std::uint64_t addr = 0, std::string d = {})
      : code(c), address(addr), detail(std::move(d)) {}
  Error(Errc c, std::string d) : code(c), detail(std::move(d)) {}

  std::string to_string() const;
};

using Fault = Error;

template <typename T>
class [[nodiscard]] Result {
 public:
  Result(T value) : v_(std::in_place_index<0>, std::move(value)) {}
  Result(Error err) : v_(std::in_place_index<1>, std::move(err)) {}

  bool ok() const { return v_.index() == 0; }
  explicit operator bool() const { return ok(); }

  T& value() & { return std::get<0>(v_); }
  const T& value() const& { return std::get<0>(v_); }
  T&& value() && { return std::get<0>(std::move(v_)); }
  const Error& error() const { return std::get<1>(v_); }

  T& operator*() & { return value(); }
  const T& operator*() const& { return value(); }
  T* operator->() { return &value(); }
  const T* operator->() const { return &value(); }

  T value_or(T fallback) const { return ok() ? value() : std::move(fallback); }

 private:
  std::variant<T, Error> v_;
};

template <>
class [[nodiscard]] Result<void> {
 public:
  Result() = default;
  Result(Error err) : err_(std::move(err)), ok_(false) {}

  bool ok() const { return ok_; }
  explicit operator bool() const { return ok_; }
  const Error& error() const { return err_; }

 private:
  Error err_{Errc::ParseError};
  bool ok_ = true;
};

inline Result<void> ok() { return {}; }

}  // namespace capac
