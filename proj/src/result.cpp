#include "capac/result.hpp"

#include <cstdio>

namespace capac {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::TagMismatch: return "TagMismatch";
    case Errc::PacAuthFailure: return "PacAuthFailure";
    case Errc::SegmentationOnCorruptPac: return "SegmentationOnCorruptPac";
    case Errc::OutOfBounds: return "OutOfBounds";
    case Errc::Unmapped: return "Unmapped";
    case Errc::UnalignedAddress: return "UnalignedAddress";
    case Errc::SignAlreadySigned: return "SignAlreadySigned";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::AfterInitSealed: return "AfterInitSealed";
    case Errc::EntryDenied: return "EntryDenied";
    case Errc::NestedEntry: return "NestedEntry";
    case Errc::UnknownDomain: return "UnknownDomain";
    case Errc::NotInDomain: return "NotInDomain";
    case Errc::DomainAuthFailure: return "DomainAuthFailure";
    case Errc::ProcessTerminated: return "ProcessTerminated";
    case Errc::PathAuthDenied: return "PathAuthDenied";
    case Errc::PathResolutionError: return "PathResolutionError";
    case Errc::FdRangeExceeded: return "FdRangeExceeded";
    case Errc::FdAuthDenied: return "FdAuthDenied";
    case Errc::FdCapDenied: return "FdCapDenied";
    case Errc::FdReserved: return "FdReserved";
    case Errc::WouldBlock: return "WouldBlock";
    case Errc::OutOfMemory: return "OutOfMemory";
    case Errc::InvalidFree: return "InvalidFree";
    case Errc::PtrAuthDenied: return "PtrAuthDenied";
    case Errc::LoweringError: return "LoweringError";
    case Errc::CyclicTypeError: return "CyclicTypeError";
    case Errc::ParseError: return "ParseError";
    case Errc::ExecutionLimit: return "ExecutionLimit";
    case Errc::ScenarioParseError: return "ScenarioParseError";
  }
  return "Unknown";
}

std::string Error::to_string() const {
  std::string out(errc_name(code));
  if (address != 0) {
    char buf[32];
    std::snprintf(buf, sizeof buf, " @0x%llx", static_cast<unsigned long long>(address));
    out += buf;
  }
  if (!detail.empty()) {
    out += ": ";
    out += detail;
  }
  return out;
}

}  // namespace capac
